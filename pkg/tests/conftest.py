import pytest
from hypothesis import settings

# the first call into a compiled kernel pays its JIT/cache-load cost
settings.register_profile("default", deadline=None)
settings.load_profile("default")

_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture(scope="session")
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])

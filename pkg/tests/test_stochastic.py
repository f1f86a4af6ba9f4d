import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from mempoolsim.stochastic import (
    AttributeModel,
    IntensityFunction,
    evaluate_intensity,
    sample_arrival_times,
    sample_attribute_pair,
    sample_attributes,
    thin_candidates,
)


def rng(seed=0):
    return np.random.default_rng(seed)


class TestIntensity:
    def test_constant(self):
        assert evaluate_intensity(IntensityFunction.constant(3.0), 999) == 3.0

    def test_sinusoid_midpoint_and_peak(self):
        lam = IntensityFunction.sinusoid(3.0, 3.3, period=3600)
        assert lam(0) == pytest.approx(3.15)
        assert lam(900) == pytest.approx(3.3)
        assert lam(2700) == pytest.approx(3.0)

    def test_ramp_clamps(self):
        lam = IntensityFunction.linear_ramp(1.0, 3.0, duration=100)
        assert lam(np.array([0.0, 50.0, 100.0, 500.0])).tolist() == [1.0, 2.0, 3.0, 3.0]

    def test_bound_checked_at_construction(self):
        with pytest.raises(ValueError, match="lambda_max"):
            IntensityFunction.sinusoid(3.0, 3.3, lambda_max=3.2)

    def test_default_bound(self):
        assert IntensityFunction.constant(3.0).lambda_max == 7.2
        assert IntensityFunction.constant(9.0).lambda_max == 9.0

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(kind="constant", lambda_lo=1.0, lambda_hi=2.0, lambda_max=7.2),
            dict(kind="sinusoid", lambda_lo=2.0, lambda_hi=1.0, lambda_max=7.2),
            dict(kind="sinusoid", lambda_lo=-1.0, lambda_hi=1.0, lambda_max=7.2),
            dict(kind="sinusoid", lambda_lo=1.0, lambda_hi=2.0, lambda_max=7.2, period=0),
            dict(kind="linear_ramp", lambda_lo=1.0, lambda_hi=2.0, lambda_max=7.2),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            IntensityFunction(**kwargs)

    @given(
        lo=st.floats(0, 10),
        width=st.floats(0, 5),
        t=st.floats(0, 1e7),
        kind=st.sampled_from(["sinusoid", "linear_ramp"]),
    )
    def test_stays_within_range(self, lo, width, t, kind):
        hi = lo + width
        lam = (
            IntensityFunction.sinusoid(lo, hi, 3600.0)
            if kind == "sinusoid"
            else IntensityFunction.linear_ramp(lo, hi, 1e6)
        )
        v = lam(t)
        assert lo <= v <= hi <= lam.lambda_max


class TestThinning:
    def test_full_acceptance_when_bound_is_tight(self):
        lam = IntensityFunction.constant(2.0, lambda_max=2.0)
        cand, keep = thin_candidates(lam, 1e5, rng(1))
        assert keep.all()
        n = len(cand)
        # Poisson(2e5): 5 standard deviations
        assert abs(n - 2e5) < 5 * math.sqrt(2e5)

    def test_sinusoid_mean_rate(self):
        lam = IntensityFunction.sinusoid(3.0, 3.3, period=3600, lambda_max=3.3)
        horizon = 1e6
        expected, _ = integrate.quad(lam, 0, horizon, limit=2000)
        t = sample_arrival_times(lam, horizon, rng(2))
        assert len(t) / horizon == pytest.approx(expected / horizon, rel=0.01)
        assert expected / horizon == pytest.approx(3.15, rel=1e-3)

    def test_output_is_increasing_inside_horizon(self):
        t = sample_arrival_times(IntensityFunction.sinusoid(3.0, 3.3), 5e4, rng(3))
        assert np.all(np.diff(t) > 0)
        assert t[0] > 0 and t[-1] <= 5e4

    def test_bound_invariance_against_direct_poisson(self):
        # thinning at 6.0 or at 3.0 must both look like a direct Poisson(3.0)
        direct = rng(4).exponential(1 / 3.0, 10_000)
        for bound, seed in ((6.0, 5), (3.0, 6)):
            t = sample_arrival_times(IntensityFunction.constant(3.0, lambda_max=bound), 1e5, rng(seed))
            gaps = np.diff(np.concatenate([[0.0], t]))[:10_000]
            assert stats.ks_2samp(gaps, direct).pvalue > 0.01
            assert stats.kstest(gaps, "expon", args=(0, 1 / 3.0)).pvalue > 0.01

    def test_doubling_intensity_doubles_count(self):
        a = sample_arrival_times(IntensityFunction.sinusoid(1.0, 1.5, lambda_max=3.0), 2e5, rng(7))
        b = sample_arrival_times(IntensityFunction.sinusoid(2.0, 3.0, lambda_max=3.0), 2e5, rng(8))
        assert len(b) / len(a) == pytest.approx(2.0, rel=0.02)

    def test_zero_rate(self):
        t = sample_arrival_times(IntensityFunction.constant(0.0), 1e4, rng(9))
        assert t.size == 0

    def test_deterministic(self):
        lam = IntensityFunction.sinusoid(3.0, 3.3)
        assert np.array_equal(sample_arrival_times(lam, 1e4, rng(10)), sample_arrival_times(lam, 1e4, rng(10)))

    def test_rejects_nonpositive_horizon(self):
        with pytest.raises(ValueError):
            sample_arrival_times(IntensityFunction.constant(1.0), 0.0, rng())


class TestAttributes:
    @pytest.mark.parametrize("rho", [0.0, 0.2, -0.5])
    def test_log_correlation(self, rho):
        model = AttributeModel(copula_rho=rho, min_size=1)
        fee, size = sample_attributes(model, 100_000, rng(11))
        r = np.corrcoef(np.log(fee), np.log(size))[0, 1]
        # ceil to whole units barely moves the logs of values this large
        assert r == pytest.approx(rho, abs=0.02)

    def test_mean_size(self):
        model = AttributeModel()
        _, size = sample_attributes(model, 100_000, rng(12))
        target = math.exp(5.95 + 0.18)
        assert size.mean() == pytest.approx(target, rel=0.02)
        assert 455 < target < 465

    @pytest.mark.parametrize("rho", [0.0, 0.7])
    def test_marginals_preserved(self, rho):
        model = AttributeModel(copula_rho=rho, min_size=1)
        fee, size = sample_attributes(model, 20_000, rng(13))
        # integer rounding: compare the continuous marginal one unit below
        fee_ks = stats.kstest(fee - 0.5, stats.lognorm(s=1.0, scale=math.exp(9.0)).cdf)
        size_ks = stats.kstest(size - 0.5, stats.lognorm(s=0.6, scale=math.exp(5.95)).cdf)
        assert fee_ks.pvalue > 0.01
        assert size_ks.pvalue > 0.01

    def test_floors(self):
        model = AttributeModel(fee_mu_log=-3.0, size_mu_log=3.0, min_size=150)
        fee, size = sample_attributes(model, 10_000, rng(14))
        assert fee.min() >= 1 and size.min() >= 150
        assert fee.dtype == np.int64 and size.dtype == np.int64

    def test_fast_path_matches_uniform_round_trip(self):
        model = AttributeModel()
        a = sample_attributes(model, 50_000, rng(15))
        b = sample_attributes(model, 50_000, rng(15), exact_copula=True)
        # identical normals; the ndtr/ndtri round trip may shift a ceil by one unit
        assert np.mean(a[0] == b[0]) > 0.999 and np.abs(a[0] - b[0]).max() <= 1
        assert np.mean(a[1] == b[1]) > 0.999 and np.abs(a[1] - b[1]).max() <= 1

    def test_pair(self):
        fee, size = sample_attribute_pair(AttributeModel(), rng(16))
        assert isinstance(fee, int) and isinstance(size, int)
        assert fee > 0 and size >= 150

    @pytest.mark.parametrize(
        "kwargs", [dict(copula_rho=1.0), dict(fee_sigma_log=0.0), dict(min_size=0), dict(min_size=1.5)]
    )
    def test_invalid_model(self, kwargs):
        with pytest.raises(ValueError):
            AttributeModel(**kwargs)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**32), n=st.integers(0, 200))
    def test_deterministic(self, seed, n):
        a = sample_attributes(AttributeModel(), n, rng(seed))
        b = sample_attributes(AttributeModel(), n, rng(seed))
        assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])

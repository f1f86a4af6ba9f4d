import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mempoolsim.csvio import (
    TraceArrivals,
    TraceError,
    atomic_write_text,
    fmt,
    load_trace,
    read_csv,
    write_csv,
    write_trace,
)
from mempoolsim.engine import DAY, SimConfig, generate_arrivals
from mempoolsim.mempool import Strategy

HEADER = "arrival_time_s,fee_satoshi,size_bytes\n"


def write(tmp_path, body, header=HEADER):
    p = tmp_path / "t.csv"
    p.write_text(header + body)
    return p


class TestFormat:
    @pytest.mark.parametrize(
        "value,text",
        [
            (0.0, "0"),
            (1.0, "1"),
            (13.0123456, "13.0123"),
            (1234567.0, "1234570"),
            (0.000123456789, "0.000123457"),
            (-2.5, "-2.5"),
            (7, "7"),
            (np.int64(42), "42"),
            (None, ""),
            (Strategy.FIFO, "fifo"),
            (float("nan"), "nan"),
        ],
    )
    def test_cells(self, value, text):
        assert fmt(value) == text

    @given(st.floats(allow_nan=False, allow_infinity=False, min_value=-1e12, max_value=1e12))
    def test_six_significant_digits(self, x):
        back = float(fmt(x))
        assert back == pytest.approx(x, rel=5e-6, abs=1e-300)


class TestTrace:
    def test_three_rows(self, tmp_path):
        t = load_trace(write(tmp_path, "1.5,100,250\n2.0,5,300\n2.0,7,150\n"))
        assert len(t) == 3
        assert t.fee.tolist() == [100, 5, 7] and t.size.dtype == np.int64

    def test_descending_timestamps_name_row(self, tmp_path):
        with pytest.raises(TraceError, match="row 2"):
            load_trace(write(tmp_path, "1.0,1,200\n2.0,1,200\n1.5,1,200\n"))

    @pytest.mark.parametrize(
        "body,row",
        [
            ("1.0,0,200\n", "row 0"),
            ("1.0,1,200\n2.0,5,0\n", "row 1"),
            ("1.0,1,200\n2.0,x,5\n", "row 1"),
            ("1.0,1,200\n2.0,1\n", "row 1"),
            ("1.0,1.5,200\n", "row 0"),
            ("-1.0,1,200\n", "row 0"),
        ],
    )
    def test_bad_rows(self, tmp_path, body, row):
        with pytest.raises(TraceError, match=row):
            load_trace(write(tmp_path, body))

    def test_empty(self, tmp_path):
        with pytest.raises(TraceError):
            load_trace(write(tmp_path, ""))

    def test_wrong_header(self, tmp_path):
        with pytest.raises(TraceError, match="header"):
            load_trace(write(tmp_path, "1,1,200\n", header="t,f,s\n"))

    def test_round_trip_of_simulated_arrivals(self, tmp_path):
        t, f, s = generate_arrivals(SimConfig(horizon=DAY / 8, seed=5))
        t, f, s = t[:10_000], f[:10_000], s[:10_000]
        assert len(t) == 10_000
        write_trace(tmp_path / "trace.csv", t, f, s)
        back = load_trace(tmp_path / "trace.csv")
        assert np.array_equal(back.arrival_time, t)
        assert np.array_equal(back.fee, f) and np.array_equal(back.size, s)
        raw = (tmp_path / "trace.csv").read_bytes()
        assert b"\r" not in raw and raw.startswith(HEADER.encode())

    def test_direct_construction_validates(self):
        with pytest.raises(TraceError, match="row 1"):
            TraceArrivals(np.array([2.0, 1.0]), np.array([1, 1]), np.array([200, 200]))


class TestAtomicWrites:
    def test_failure_leaves_old_file(self, tmp_path):
        p = tmp_path / "summary.csv"
        write_csv(p, ["a"], [[1]])

        def rows():
            yield [2]
            raise RuntimeError("boom")

        with pytest.raises(RuntimeError):
            write_csv(p, ["a"], rows())
        assert p.read_text() == "a\n1\n"
        assert os.listdir(tmp_path) == ["summary.csv"]

    def test_round_trip(self, tmp_path):
        rows = [[1000000, Strategy.FEE_BASED, 13.0123456, None], [2, Strategy.FIFO, 0.5, 3]]
        write_csv(tmp_path / "x.csv", ["capacity", "strategy", "mean", "n"], rows)
        header, back = read_csv(tmp_path / "x.csv")
        assert header == ["capacity", "strategy", "mean", "n"]
        assert back == [["1000000", "fee_based", "13.0123", ""], ["2", "fifo", "0.5", "3"]]

    def test_text(self, tmp_path):
        atomic_write_text(tmp_path / "a.txt", "hello\n")
        assert (tmp_path / "a.txt").read_text() == "hello\n"

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mempoolsim.engine import DAY, SimConfig, SimResult, TransactionTable, run_simulation
from mempoolsim.metrics import (
    EmptySummaryError,
    QuantileKey,
    RunSample,
    ecdf,
    ecdf_at,
    ecdf_quantile,
    quartile_report,
    summarize,
    thin_ecdf,
)
from mempoolsim.stochastic import IntensityFunction


def handmade(arrival, size, fee, block_id, block_time, block_used, capacity=1000, warmup=0.0):
    arrival = np.asarray(arrival, float)
    block_id = np.asarray(block_id, np.int64)
    block_time = np.asarray(block_time, float)
    wait = np.full(len(arrival), np.nan)
    inc = block_id >= 0
    wait[inc] = block_time[block_id[inc]] - arrival[inc]
    table = TransactionTable(arrival, np.asarray(size), np.asarray(fee), block_id, wait)
    cfg = SimConfig(capacity=capacity, horizon=1e6, warmup=warmup)
    return SimResult(table, block_time, np.asarray(block_used), np.zeros(len(block_time), np.int64),
                     np.zeros(len(block_time), np.int64), cfg)


class TestSummarize:
    def test_mean_in_minutes(self):
        r = handmade([0.0, 0.0], [200, 200], [1, 1], [0, 1], [600.0, 1200.0], [200, 200])
        m = summarize(r)
        assert m.mean_wait == 15.0
        assert m.std_wait == 5.0  # population deviation of {10, 20}
        assert (m.included_count, m.pending_count) == (2, 0)

    def test_full_blocks(self):
        r = handmade([0.0], [1000], [1], [0], [60.0, 120.0], [1000, 1000])
        m = summarize(r)
        assert (m.fill_mean, m.fill_std) == (1.0, 0.0)

    def test_empty_is_flagged_not_nan(self):
        r = handmade([10.0], [200], [1], [-1], [5.0], [0])
        m = summarize(r)
        assert m.empty and m.mean_wait is None and m.std_wait is None
        assert m.pending_count == 1

    def test_warmup_excludes_early_records(self):
        r = handmade([0.0, 500.0], [200, 200], [1, 1], [0, 1], [100.0, 800.0], [200, 200], warmup=400.0)
        m = summarize(r)
        assert m.included_count == 1 and m.mean_wait == 5.0
        assert m.fill_mean == 0.2
        assert summarize(r, warmup=0.0).included_count == 2

    def test_matches_flat_recomputation(self):
        r = run_simulation(SimConfig(intensity=IntensityFunction.constant(3.0), horizon=DAY, capacity=600_000, seed=2))
        m = summarize(r)
        cut = r.config_echo.warmup
        waits, fills = [], []
        for tx in r.transactions:
            if tx.arrival_time >= cut and tx.included:
                waits.append(tx.waiting_time / 60)
        for b in r.blocks:
            if b.creation_time >= cut:
                fills.append(b.fill_rate)
        assert m.included_count == len(waits)
        assert m.mean_wait == pytest.approx(sum(waits) / len(waits), rel=1e-12)
        assert m.std_wait == pytest.approx(np.std(waits), rel=1e-9)
        assert m.fill_mean == pytest.approx(np.mean(fills), rel=1e-12)
        late = r.transactions.arrival_time >= cut
        assert m.pending_count == np.sum(late & ~r.transactions.included)

    def test_pooling(self):
        cfg = SimConfig(horizon=DAY / 2, seed=1)
        a, b = run_simulation(cfg), run_simulation(SimConfig(horizon=DAY / 2, seed=2))
        pooled = summarize([a, b])
        sa, sb = RunSample.from_result(a), RunSample.from_result(b)
        assert pooled.included_count == sa.waits.size + sb.waits.size
        assert pooled.mean_wait == pytest.approx(np.concatenate([sa.waits, sb.waits]).mean())
        assert summarize(RunSample.pool([sa, sb])) == pooled


class TestEcdf:
    def test_single(self):
        assert ecdf([10]) == [(10.0, 1.0)]

    def test_repeats(self):
        assert ecdf([10, 20, 20, 40]) == [(10.0, 0.25), (20.0, 0.75), (40.0, 1.0)]

    def test_empty(self):
        with pytest.raises(ValueError):
            ecdf([])

    def test_counting_oracle(self):
        x = np.random.default_rng(0).exponential(10, 1000).round(1)
        for v, frac in ecdf(x):
            assert frac == np.count_nonzero(x <= v) / x.size

    @given(st.lists(st.floats(0, 1e4), min_size=1, max_size=200))
    def test_shape(self, xs):
        pts = ecdf(xs)
        assert pts[-1][1] == 1.0
        assert all(a[0] < b[0] and a[1] < b[1] for a, b in zip(pts, pts[1:]))

    def test_evaluation_helpers(self):
        pts = ecdf([10, 20, 20, 40])
        assert ecdf_at(pts, 5) == 0.0 and ecdf_at(pts, 20) == 0.75 and ecdf_at(pts, 39) == 0.75
        assert ecdf_quantile(pts, 0.5) == 20.0 and ecdf_quantile(pts, 0.75) == 20.0
        assert ecdf_quantile(pts, 0.8) == 40.0

    def test_thinning_keeps_exact_points(self):
        pts = ecdf(np.arange(10_000))
        thin = thin_ecdf(pts, 100)
        assert len(thin) <= 100 and thin[-1] == pts[-1] and thin[0] == pts[0]
        assert set(thin) <= set(pts)
        assert thin_ecdf(pts, 0) == pts


class TestQuartiles:
    def eight(self):
        fee = np.arange(1, 9) * 100
        return handmade(np.zeros(8), np.full(8, 100), fee, np.arange(8), np.arange(1, 9) * 60.0, np.full(8, 100))

    def test_balanced_partition(self):
        q = quartile_report(self.eight(), "fee")
        assert q.bucket_sizes == (2, 2, 2, 2)
        assert q.bucket_mean_wait == (1.5, 3.5, 5.5, 7.5)
        assert all(c[-1][1] == 1.0 for c in q.bucket_ecdf)

    def test_boundary_goes_low(self):
        # thresholds of {1,2,2,2,3,4,5,6}: 2, 2.5, 4.25; the 2s all go to Q1, nothing lies in (2, 2.5]
        fee = np.array([1, 2, 2, 2, 3, 4, 5, 6]) * 100
        r = handmade(np.zeros(8), np.full(8, 100), fee, np.arange(8), np.arange(1, 9) * 60.0, np.full(8, 100))
        q = quartile_report(r, QuantileKey.FEE)
        assert q.thresholds == (200.0, 250.0, 425.0)
        assert q.bucket_sizes == (4, 0, 2, 2)

    def test_too_few(self):
        r = handmade(np.zeros(3), [100] * 3, [1, 2, 3], [0, 1, 2], [60.0, 120.0, 180.0], [100] * 3)
        with pytest.raises(EmptySummaryError):
            quartile_report(r)

    @given(st.lists(st.integers(1, 20), min_size=4, max_size=80), st.sampled_from(list(QuantileKey)))
    def test_partition_and_order(self, fees, key):
        n = len(fees)
        r = handmade(np.zeros(n), np.full(n, 100), np.array(fees), np.arange(n), np.arange(1, n + 1) * 60.0, np.full(n, 100))
        q = quartile_report(r, key)
        assert sum(q.bucket_sizes) == n
        assert list(q.thresholds) == sorted(q.thresholds)
        ref = np.quantile(np.array(fees, float), [0.25, 0.5, 0.75])
        scale = 100.0 if key is QuantileKey.FEE_PER_BYTE else 1.0
        np.testing.assert_allclose(np.array(q.thresholds) * scale, ref)

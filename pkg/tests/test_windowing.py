import numpy as np
import pytest

from ftdf import windowing
from ftdf.errors import IndexOutOfRange, InvalidOverlap, InvalidWindowLength, TraceTooShort
from ftdf.ingest import PowerTrace

from oracles import brute_force_window_count


def _trace(values):
    return PowerTrace(np.asarray(values, float), fs=1.0, source_id="t")


class TestPlanWindows:
    def test_quarter_overlap_example(self):
        plan = windowing.plan_windows(10, 4, 0.25)
        assert plan.hop == 3 and plan.count == 3
        assert plan.starts().tolist() == [0, 3, 6]

    def test_exact_fit_single_window(self):
        for overlap in (0.0, 0.25, 0.5):
            assert windowing.plan_windows(64, 64, overlap).count == 1

    def test_large_window_single(self):
        plan = windowing.plan_windows(4096, 3072, 0.25)
        assert plan.hop == 2304 and plan.count == 1

    def test_too_short(self):
        with pytest.raises(TraceTooShort):
            windowing.plan_windows(10, 11)

    def test_invalid_overlap(self):
        for bad in (-0.1, 1.0, 1.5):
            with pytest.raises(InvalidOverlap):
                windowing.plan_windows(10, 4, bad)

    def test_window_len_floor(self):
        with pytest.raises(InvalidWindowLength):
            windowing.plan_windows(10, 1)

    def test_count_matches_brute_force(self):
        rng = np.random.default_rng(17)
        for _ in range(500):
            n = int(rng.integers(2, 500))
            m = int(rng.integers(n, 5000))
            plan = windowing.plan_windows(m, n, 0.25)
            assert plan.count == brute_force_window_count(m, n, plan.hop)

    def test_last_window_fits(self):
        rng = np.random.default_rng(18)
        for _ in range(100):
            n = int(rng.integers(2, 200))
            m = int(rng.integers(n, 2000))
            plan = windowing.plan_windows(m, n)
            assert (plan.count - 1) * plan.hop + plan.window_len <= m


class TestExtractSegment:
    def test_slice_example(self):
        tr = _trace(range(1, 11))
        plan = windowing.plan_windows(10, 4, 0.25)
        seg = windowing.extract_segment(tr, plan, 2)
        assert seg.values.tolist() == [4, 5, 6, 7]
        assert seg.index == 2 and seg.trace_ref == "t"

    def test_first_window_is_prefix(self):
        tr = _trace(range(20))
        plan = windowing.plan_windows(20, 8)
        assert windowing.extract_segment(tr, plan, 1).values.tolist() == list(range(8))

    def test_out_of_range(self):
        tr = _trace(range(10))
        plan = windowing.plan_windows(10, 4)
        for bad in (0, plan.count + 1):
            with pytest.raises(IndexOutOfRange):
                windowing.extract_segment(tr, plan, bad)

    def test_consecutive_overlap_is_quarter(self):
        for n in (4, 8, 64, 100):
            tr = _trace(np.arange(5 * n))
            plan = windowing.plan_windows(5 * n, n)
            a = windowing.extract_segment(tr, plan, 1).values
            b = windowing.extract_segment(tr, plan, 2).values
            shared = np.intersect1d(a, b)
            assert shared.size == n // 4

    def test_window_matrix_matches_segments(self):
        rng = np.random.default_rng(3)
        tr = _trace(rng.uniform(0, 50, 137))
        plan = windowing.plan_windows(137, 16)
        w = windowing.window_matrix(tr.samples, plan)
        assert w.shape == (plan.count, 16)
        for k in range(1, plan.count + 1):
            assert np.array_equal(w[k - 1], windowing.extract_segment(tr, plan, k).values)

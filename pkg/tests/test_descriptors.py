import math

import numpy as np
import pytest

from ftdf import descriptors as d
from ftdf.errors import DegenerateSignal, InvalidSpec
from ftdf.ingest import PowerTrace
from ftdf.windowing import extract_segment, plan_windows

from oracles import NAIVE, naive_rmsf_literal, random_segment, yule_walker_direct


class TestPointValues:
    def test_rmsf(self):
        assert d.rmsf([3.0, 4.0]) == pytest.approx(math.sqrt(12.5), abs=1e-12)
        assert d.rmsf(np.zeros(16)) == 0.0
        assert d.rmsf(np.full(9, -7.0)) == pytest.approx(7.0)

    def test_rmsf_literal_variant(self):
        seg = [3.0, -4.0, 5.0]
        assert d.rmsf(seg, literal=True) == pytest.approx(12.0 / math.sqrt(3))
        assert d.rmsf(seg, literal=True) == pytest.approx(naive_rmsf_literal(seg))

    def test_madf(self):
        assert d.madf([1.0, 2.0, 3.0, 4.0]) == pytest.approx(1.0)
        assert d.madf(np.full(5, 3.3)) == 0.0
        for a in (0.0, 2.5, 7.0):
            assert d.madf([-a, a]) == pytest.approx(a)

    def test_iamf(self):
        assert d.iamf([2.0, -2.0]) == pytest.approx(0.0)
        assert d.iamf([2.0, 0.0]) == pytest.approx(2.0)
        assert d.iamf(np.zeros(8)) == 0.0

    def test_zcf(self):
        assert d.zcf([1.0, -1.0, 1.0]) == 4.0
        assert d.zcf([5.0, 1.0, 3.0]) == 0.0
        assert d.zcf([1.0, 0.0, 1.0]) == 2.0

    def test_wlf(self):
        assert d.wlf([0.0, 1.0, 0.0, 1.0]) == pytest.approx(math.log(3))
        assert d.wlf(np.full(10, 4.2)) == pytest.approx(math.log(1e-12))
        for length in (0.5, 2.0, 100.0):
            assert d.wlf([0.0, length]) == pytest.approx(math.log(length))

    def test_sscf(self):
        assert d.sscf([0.0, 1.0, 0.0, 1.0, 0.0]) == 3.0
        assert d.sscf([1.0, 2.0, 3.0, 4.0]) == 0.0
        constant = np.full(10, 2.0)
        assert d.sscf(constant) == 0.0
        assert d.sscf(constant, threshold=0.0) == 8.0  # N-2 when threshold is 0


class TestOracleEquivalence:
    def test_matches_naive_reimplementation(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            seg = random_segment(rng, 64, 512)
            as_list = seg.tolist()
            for name, oracle in NAIVE.items():
                got = d.compute_descriptor(seg, name)
                want = oracle(as_list)
                # iamf sums signed terms that can cancel; 1e-9 is measured
                # against the accumulated term magnitude there
                if name == "iamf":
                    scale = sum(v * v / 2 for v in as_list) / len(as_list) + abs(sum(as_list)) / len(as_list)
                    assert abs(got - want) <= 1e-9 * max(scale, 1.0), name
                else:
                    assert got == pytest.approx(want, rel=1e-9, abs=1e-12), name

    def test_integer_valued_and_bounded(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            seg = random_segment(rng, 64, 256)
            n = seg.size
            z, s = d.zcf(seg), d.sscf(seg)
            assert abs(z - round(z)) < 1e-9 and abs(s - round(s)) < 1e-9
            assert 0 <= z <= 2 * (n - 1)
            assert 0 <= s <= n - 2


class TestInvarianceProperties:
    def test_scale_equivariance(self):
        rng = np.random.default_rng(11)
        for _ in range(30):
            seg = rng.standard_normal(128) * 10
            c = float(10 ** rng.uniform(-2, 2))
            assert d.rmsf(c * seg) == pytest.approx(abs(c) * d.rmsf(seg), rel=1e-9)
            assert d.madf(c * seg) == pytest.approx(abs(c) * d.madf(seg), rel=1e-9)
            assert d.wlf(c * seg) == pytest.approx(d.wlf(seg) + math.log(c), rel=1e-9)

    def test_shift_invariance(self):
        rng = np.random.default_rng(12)
        for _ in range(30):
            seg = rng.standard_normal(200)
            shift = float(rng.uniform(-50, 50))
            assert d.madf(seg + shift) == pytest.approx(d.madf(seg), abs=1e-9)
        assert d.zcf(rng.standard_normal(100) + 100.0) == 0.0


class TestAr:
    def _ar1(self, n, coeff, seed, offset=0.0):
        rng = np.random.default_rng(seed)
        w = rng.standard_normal(n + 200)
        x = np.empty(n + 200)
        x[0] = w[0]
        for i in range(1, n + 200):
            x[i] = coeff * x[i - 1] + w[i]
        return x[200:] + offset  # drop burn-in

    def test_white_noise_coefficient_near_zero(self):
        seg = np.random.default_rng(100).standard_normal(4096)
        a = d.estimate_ar(seg, d.ArConfig(order=1))
        oracle, _ = yule_walker_direct(seg, 1)
        assert abs(a[0]) < 0.1
        assert a[0] == pytest.approx(oracle[0], rel=1e-9)

    def test_ar1_recovery(self):
        seg = self._ar1(8192, 0.5, seed=13)
        a = d.estimate_ar(seg, d.ArConfig(order=1))
        assert a[0] == pytest.approx(0.5, abs=0.05)
        oracle, _ = yule_walker_direct(seg, 1)
        assert a[0] == pytest.approx(oracle[0], rel=1e-9)

    def test_constant_degenerate(self):
        with pytest.raises(DegenerateSignal):
            d.estimate_ar(np.full(64, 5.0), d.ArConfig(order=3))

    def test_yule_walker_residual_bound(self):
        rng = np.random.default_rng(14)
        for _ in range(50):
            p = int(rng.integers(1, 16))
            seg = self._ar1(2048, float(rng.uniform(-0.7, 0.7)), seed=int(rng.integers(1e6)))
            a = d.estimate_ar(seg, d.ArConfig(order=p))
            direct, r = yule_walker_direct(seg, p)
            R = np.array([[r[abs(i - j)] for j in range(p)] for i in range(p)])
            residual = np.max(np.abs(R @ a - r[1 : p + 1]))
            assert residual < 1e-8 * r[0]
            np.testing.assert_allclose(a, direct, rtol=1e-7, atol=1e-10)

    def test_order_validation(self):
        with pytest.raises(InvalidSpec):
            d.estimate_ar(np.arange(8.0), d.ArConfig(order=8))


class TestArf:
    def test_constant_window(self):
        assert d.arf(np.full(50, 3.0), d.ArConfig(order=5)) == pytest.approx(150.0)

    def test_zero_window(self):
        assert d.arf(np.zeros(50), d.ArConfig(order=5)) == 0.0

    def test_ar1_prediction_sum_matches_true_coefficient(self):
        seg = TestAr()._ar1(8192, 0.5, seed=21, offset=100.0)
        cfg = d.ArConfig(order=1)
        got = d.arf(seg, cfg)
        mu = seg.mean()
        x = seg - mu
        oracle = 0.5 * np.sum(x[:-1]) + seg.size * mu  # plug in the true coefficient
        assert got == pytest.approx(oracle, rel=0.05)

    def test_prediction_sum_definition(self):
        # brute-force the prediction sum from the fitted coefficients
        rng = np.random.default_rng(31)
        seg = np.cumsum(rng.standard_normal(256)) + 40.0
        cfg = d.ArConfig(order=4)
        a = d.estimate_ar(seg, cfg)
        x = seg - seg.mean()
        total = 0.0
        for i in range(4, 256):  # 0-based i, predictions for windows P..N-1
            total += sum(a[p - 1] * x[i - p] for p in range(1, 5))
        assert d.arf(seg, cfg) == pytest.approx(total + 256 * seg.mean(), rel=1e-9)


class TestExtractSeries:
    def _trace(self, values, fs=1.0):
        return PowerTrace(np.asarray(values, float), fs=fs, source_id="t")

    def test_constant_trace_madf_is_zero(self):
        tr = self._trace(np.full(40, 8.0))
        plan = plan_windows(40, 8)
        series = d.extract_series(tr, plan, "madf")
        assert series.values.tolist() == [0.0] * plan.count

    def test_length_equals_plan_count(self):
        tr = self._trace(np.random.default_rng(1).uniform(0, 10, 333))
        plan = plan_windows(333, 64)
        for name in d.DESCRIPTOR_IDS:
            series = d.extract_series(tr, plan, name, d.DescriptorParams(ar=d.ArConfig(order=5)))
            assert series.values.shape == (plan.count,)
            assert np.isfinite(series.values).all()

    def test_matches_per_window_application(self):
        rng = np.random.default_rng(2)
        tr = self._trace(rng.uniform(-5, 5, 500))
        plan = plan_windows(500, 32)
        params = d.DescriptorParams(ar=d.ArConfig(order=6))
        for name in d.DESCRIPTOR_IDS:
            series = d.extract_series(tr, plan, name, params)
            for k in range(1, plan.count + 1):
                seg = extract_segment(tr, plan, k)
                assert series.values[k - 1] == pytest.approx(
                    d.compute_descriptor(seg, name, params), rel=1e-12, abs=1e-12
                )

    def test_unknown_descriptor(self):
        tr = self._trace(np.arange(10.0))
        with pytest.raises(InvalidSpec):
            d.extract_series(tr, plan_windows(10, 4), "entropy")

    def test_series_export(self, tmp_path):
        tr = self._trace(np.arange(12.0))
        series = d.extract_series(tr, plan_windows(12, 4), "rmsf")
        path = tmp_path / "s.csv"
        d.write_feature_series(series, path)
        rows = [ln.split(",") for ln in path.read_text().splitlines()]
        assert [r[0] for r in rows] == ["t"] * series.values.size
        assert [int(r[1]) for r in rows] == list(range(1, series.values.size + 1))
        assert all(r[2] == "rmsf" for r in rows)
        np.testing.assert_allclose([float(r[3]) for r in rows], series.values)

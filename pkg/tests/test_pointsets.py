import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mixtransport.errors import (
    DomainError,
    EmptyGridError,
    InvalidInputError,
    UnsupportedDimensionError,
)
from mixtransport.pointsets import (
    SparseGridLevel,
    WeightedPointSet,
    gauss_hermite_rule,
    halton,
    halton_normal_set,
    inverse_erf,
    mc_points,
    read_pointset_csv,
    smolyak_grid,
    uniform_to_normal,
    write_pointset_csv,
)


class TestHalton:
    def test_base2_prefix(self):
        x = halton(1, 3, skip=0, leap=0)
        assert x[:, 0] == pytest.approx([0.5, 0.25, 0.75])

    def test_first_point_2d(self):
        x = halton(2, 1, skip=0, leap=0)
        assert x[0] == pytest.approx([0.5, 1 / 3])

    def test_three_points_2d(self):
        x = halton(2, 3, skip=0, leap=0)
        expected = np.array([[0.5, 1 / 3], [0.25, 2 / 3], [0.75, 1 / 9]])
        assert np.allclose(x, expected, atol=1e-15)

    def test_open_cube(self):
        x = halton(5, 500)  # default skip/leap
        assert np.all(x > 0.0) and np.all(x < 1.0)

    def test_skip_leap_indexing(self):
        # element k is the radical inverse of skip + k*(leap+1) + 1
        full = halton(1, 1000, skip=0, leap=0)
        leaped = halton(1, 10, skip=7, leap=3)
        assert leaped[:, 0] == pytest.approx(full[7::4][:10, 0])

    def test_dimension_cap(self):
        with pytest.raises(UnsupportedDimensionError):
            halton(101, 10)

    def test_scramble_changes_points_keeps_cube(self):
        a = halton(3, 64, scramble=False)
        b = halton(3, 64, scramble=True)
        assert not np.allclose(a, b)
        assert np.all(b > 0.0) and np.all(b < 1.0)

    def test_product_integral_proxy(self):
        # empirical integral of x1*x2 over 1024 points, far tighter than MC
        x = halton(2, 1024, skip=0, leap=0)
        assert abs(np.mean(x[:, 0] * x[:, 1]) - 0.25) < 5e-3


class TestInverseErf:
    def test_zero(self):
        assert inverse_erf(0.0) == 0.0

    def test_oddness_exact(self):
        for y in (0.1, 0.5, 0.9, 0.999999, 0.3141592):
            assert inverse_erf(-y) == -inverse_erf(y)

    @pytest.mark.parametrize("y", [0.1, -0.1, 0.5, -0.5, 0.9, -0.9,
                                   0.999999, -0.999999])
    def test_round_trip_probe_set(self, y):
        x = inverse_erf(y)
        assert math.erf(x) == pytest.approx(y, rel=1e-14)

    def test_domain_errors(self):
        for bad in (1.0, -1.0, 1.5, float("nan")):
            with pytest.raises(DomainError):
                inverse_erf(bad)

    @settings(max_examples=200, deadline=None)
    @given(st.floats(min_value=-0.9999999999, max_value=0.9999999999))
    def test_round_trip_property(self, y):
        x = inverse_erf(y)
        assert math.erf(x) == pytest.approx(y, rel=1e-13, abs=1e-300)

    def test_extreme_clamp_region(self):
        # largest representable argument before the clamp
        y = 1.0 - 2.0**-52
        x = inverse_erf(y)
        assert np.isfinite(x)
        assert math.erf(x) == pytest.approx(y, rel=1e-14)


class TestUniformToNormal:
    def test_center_maps_to_zero(self):
        assert uniform_to_normal(np.full((1, 3), 0.5)) == pytest.approx(
            np.zeros((1, 3)))

    def test_standard_quantile(self):
        # oracle: bisection on Phi(z) = (1 + erf(z/sqrt 2))/2 = 0.975
        lo, hi = 0.0, 10.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if 0.5 * (1.0 + math.erf(mid / math.sqrt(2))) < 0.975:
                lo = mid
            else:
                hi = mid
        z = uniform_to_normal(np.array([0.975]))
        assert z[0] == pytest.approx(0.5 * (lo + hi), abs=1e-12)
        assert z[0] == pytest.approx(1.959963984540054, abs=1e-12)

    def test_monotone(self):
        assert uniform_to_normal(np.array([0.6]))[0] > \
            uniform_to_normal(np.array([0.4]))[0]

    def test_round_trip_with_cdf(self):
        # CDF formed through erfc so the tail probabilities are accurate
        z = np.linspace(-6.0, 6.0, 121)
        u = np.where(
            z <= 0,
            [0.5 * math.erfc(-v / math.sqrt(2)) for v in z],
            [1.0 - 0.5 * math.erfc(v / math.sqrt(2)) for v in z],
        )
        back = uniform_to_normal(u)
        # a double u near 1 only resolves z to ulp(1)/phi(z); below that
        # ceiling the map must reproduce z to 1e-12
        ulp_noise = (2.0**-53) / (np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi))
        bound = 1e-12 + np.where(z > 0, ulp_noise, 0.0)
        assert np.all(np.abs(back - z) < bound)
        strict = z <= 0.5
        assert np.max(np.abs(back[strict] - z[strict])) < 1e-12

    def test_out_of_range_rejected(self):
        with pytest.raises(InvalidInputError):
            uniform_to_normal(np.array([1.5]))
        with pytest.raises(InvalidInputError):
            uniform_to_normal(np.array([-0.1]))


def normal_moment(k):
    # 0, 1, 0, 3, 0, 15, ... by the recursion m_k = (k-1) m_{k-2}
    if k % 2:
        return 0.0
    m = 1.0
    for i in range(2, k + 1, 2):
        m *= i - 1
    return m


class TestGaussHermite:
    def test_one_point(self):
        x, w = gauss_hermite_rule(1)
        assert x == pytest.approx([0.0]) and w == pytest.approx([1.0])

    def test_two_points(self):
        x, w = gauss_hermite_rule(2)
        assert x == pytest.approx([-1.0, 1.0])
        assert w == pytest.approx([0.5, 0.5])

    def test_five_point_moments(self):
        x, w = gauss_hermite_rule(5)
        for k in range(10):
            assert float(w @ x**k) == pytest.approx(normal_moment(k), abs=1e-12)

    def test_symmetry_exact(self):
        x, w = gauss_hermite_rule(14)
        assert np.array_equal(x, -x[::-1])
        assert np.array_equal(w, w[::-1])

    def test_weights_sum_to_one(self):
        for n in (3, 17, 40):
            _, w = gauss_hermite_rule(n)
            assert w.sum() == pytest.approx(1.0, abs=1e-13)


class TestSmolyak:
    def test_1d_reduces_to_gauss_hermite(self):
        for q in (1, 3, 6):
            g = smolyak_grid(SparseGridLevel(q, 1))
            x, w = gauss_hermite_rule(q)
            order = np.argsort(g.points[:, 0])
            assert g.points[order, 0] == pytest.approx(x)
            assert g.weights[order] == pytest.approx(w)

    def test_d2_level2_single_node(self):
        g = smolyak_grid(SparseGridLevel(2, 2))
        assert g.n == 1
        assert g.points[0] == pytest.approx([0.0, 0.0])
        assert g.weights[0] == pytest.approx(1.0)

    def test_weights_sum_to_one(self):
        for d, q in ((2, 5), (3, 6), (2, 9)):
            g = smolyak_grid(SparseGridLevel(q, d))
            assert g.weights.sum() == pytest.approx(1.0, abs=1e-12)

    def test_level_below_dimension_fails(self):
        with pytest.raises(EmptyGridError):
            smolyak_grid(SparseGridLevel(1, 2))

    def test_counts_increase_with_level(self):
        counts = [smolyak_grid(SparseGridLevel(q, 2)).n for q in range(2, 9)]
        assert all(b > a for a, b in zip(counts, counts[1:]))

    def test_axis_permutation_symmetry(self):
        g = smolyak_grid(SparseGridLevel(6, 2))
        pts = {(round(p[0], 10), round(p[1], 10)) for p in g.points}
        swapped = {(b, a) for a, b in pts}
        assert pts == swapped

    def test_exactness_small(self):
        # degree <= 2(q-d)+1 monomials integrate exactly at q=4, d=2
        g = smolyak_grid(SparseGridLevel(4, 2))
        for i in range(6):
            for j in range(6 - i):
                if i + j > 2 * (4 - 2) + 1:
                    continue
                est = float(g.weights @ (g.points[:, 0]**i * g.points[:, 1]**j))
                assert est == pytest.approx(
                    normal_moment(i) * normal_moment(j), abs=1e-10)

    def test_negative_weights_appear(self):
        g = smolyak_grid(SparseGridLevel(5, 2))
        assert np.any(g.weights < 0.0)


class TestMcPoints:
    def test_uniform_weights_and_determinism(self):
        a = mc_points(3, 50, 7)
        b = mc_points(3, 50, 7)
        assert np.all(a.weights == 1.0 / 50)
        assert np.array_equal(a.points, b.points)

    def test_empirical_covariance(self):
        ps = mc_points(2, 2**16, 1)
        cov = np.cov(ps.points.T)
        assert np.linalg.norm(cov - np.eye(2), "fro") < 0.05


class TestWeightedPointSet:
    def test_weights_must_sum_to_one(self):
        with pytest.raises(InvalidInputError):
            WeightedPointSet(np.zeros((2, 1)), np.array([0.6, 0.6]), "mc")

    def test_nonfinite_rejected(self):
        with pytest.raises(InvalidInputError):
            WeightedPointSet(np.array([[np.inf]]), np.array([1.0]), "mc")

    def test_unknown_provenance(self):
        with pytest.raises(InvalidInputError):
            WeightedPointSet(np.zeros((1, 1)), np.array([1.0]), "whatever")

    def test_csv_round_trip_exact(self):
        ps = halton_normal_set(3, 17)
        buf = io.StringIO()
        write_pointset_csv(ps, buf, comments=["seed: 0"])
        buf.seek(0)
        back = read_pointset_csv(buf)
        assert np.array_equal(back.points, ps.points)
        assert np.array_equal(back.weights, ps.weights)
        assert back.provenance == "qmc-halton"

    def test_header_format(self):
        ps = mc_points(2, 3, 0)
        buf = io.StringIO()
        write_pointset_csv(ps, buf)
        text = buf.getvalue()
        assert "w,x1,x2\n" in text

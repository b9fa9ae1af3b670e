import io
import math

import numpy as np
import pytest

from mixtransport.errors import (
    DimensionMismatchError,
    InsufficientDataError,
    InvalidInputError,
    UnresolvedReferenceError,
)
from mixtransport.mixtures import (
    MixtureSpec,
    composition_sample,
    demo_three_component,
    random_mixture,
)
from mixtransport.pointsets import WeightedPointSet, halton_normal_set
from mixtransport.quadrature import (
    ConvergenceRecord,
    convergence_study,
    estimate,
    eval_integrand,
    fit_rate,
    integrand,
    records_from_csv,
    records_to_csv,
    reference_value,
    _ball_probability_exact,
    _mc_reference,
    _tensor_gh_reference,
)
from mixtransport.transport import TransportConfig, componentwise_transport, transport_set

DEMO = demo_three_component()


class TestEvalIntegrand:
    def test_ridge_argument_cancels(self):
        # mean(y) = -0.3 makes the cosine argument exactly zero
        y = np.full((1, 4), -0.3)
        assert eval_integrand("f9", y)[0] == pytest.approx(1.0)

    def test_centered_values(self):
        ystar = np.full((1, 3), 0.5)
        assert eval_integrand("f2", ystar)[0] == 0.0
        assert eval_integrand("f7", ystar)[0] == 1.0
        assert eval_integrand("f1", ystar)[0] == 0.0

    def test_closed_ball_boundary_included(self):
        y = np.array([[0.5, 1.0]])  # distance exactly 1/2 from y*
        assert eval_integrand("f10", y)[0] == 1.0
        assert eval_integrand("f10", np.array([[0.5, 1.0 + 1e-9]]))[0] == 0.0

    def test_indicator_values_binary(self):
        rng = np.random.default_rng(0)
        y = rng.standard_normal((100, 2))
        for fid in ("f10", "f10~"):
            vals = eval_integrand(fid, y)
            assert set(np.unique(vals)) <= {0.0, 1.0}

    def test_tilde_variants(self):
        rng = np.random.default_rng(1)
        y = rng.standard_normal((50, 3))
        d = 3
        f4 = eval_integrand("f4", y)
        assert eval_integrand("f4~", y) == pytest.approx(f4 ** (1 / d))
        f5 = eval_integrand("f5", y)
        assert eval_integrand("f5~", y) == pytest.approx(
            np.abs(f5) ** (1 / d) * np.sign(f5))
        f6 = eval_integrand("f6", y)
        assert eval_integrand("f6~", y) == pytest.approx(f6 ** (1 / d))

    def test_finite_everywhere(self):
        rng = np.random.default_rng(2)
        y = 50.0 * rng.standard_normal((200, 2))
        for fid in ("f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8", "f9",
                    "f10", "f4~", "f5~", "f6~", "f10~"):
            assert np.all(np.isfinite(eval_integrand(fid, y)))

    def test_unknown_id(self):
        with pytest.raises(InvalidInputError):
            eval_integrand("f99", np.zeros((1, 2)))


def uniform_set(points):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    n = points.shape[0]
    return WeightedPointSet(points, np.full(n, 1.0 / n), "mc")


class TestEstimate:
    def test_single_point_at_center(self):
        pts = WeightedPointSet(np.full((1, 2), 0.5), np.array([1.0]), "mc")
        assert estimate(pts, integrand("f2", 2)) == 0.0

    def test_two_point_average(self):
        y = np.array([[1.0, 0.0], [0.0, 2.0]])
        pts = uniform_set(y)
        expected = 0.5 * (eval_integrand("f1", y[0:1])[0]
                          + eval_integrand("f1", y[1:2])[0])
        assert estimate(pts, integrand("f1", 2)) == pytest.approx(expected)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        y = rng.standard_normal((64, 2))
        pts = uniform_set(y)
        perm = rng.permutation(64)
        pts2 = uniform_set(y[perm])
        f = integrand("f9", 2)
        assert estimate(pts, f) == pytest.approx(estimate(pts2, f), abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            estimate(uniform_set(np.zeros((3, 2))), integrand("f2", 5))


class TestReferenceValue:
    def test_f2_isotropic_single_component(self):
        spec = MixtureSpec([1.0], [[0.5, 0.5]], [(0.7 * np.eye(2)).tolist()])
        assert reference_value(spec, integrand("f2", 2)) == pytest.approx(
            2 * 0.7**2)

    def test_f8_lognormal_identity(self):
        spec = MixtureSpec([1.0], [[0.0]], [[[1.0]]])
        v = reference_value(spec, integrand("f8", 1))
        assert v == pytest.approx(1.6487212707001282, abs=1e-12)
        # cross-check against the 40-point Gauss-Hermite oracle
        assert v == pytest.approx(
            _tensor_gh_reference(spec, integrand("f8", 1)), abs=1e-10)

    @pytest.mark.parametrize("fid", ["f2", "f8", "f9"])
    def test_closed_forms_match_tensor_oracle(self, fid):
        assert reference_value(DEMO, integrand(fid, 2)) == pytest.approx(
            _tensor_gh_reference(DEMO, integrand(fid, 2)), abs=1e-8)

    def test_ball_probability_against_mc(self):
        spec = MixtureSpec([1.0], [[0.8, 0.2]], [(1.3 * np.eye(2)).tolist()])
        exact = _ball_probability_exact(spec, 0.5)
        mc, _ = _mc_reference(spec, integrand("f10", 2), n=2**20, seeds=(1,))
        se = math.sqrt(exact * (1 - exact) / 2**20)
        assert abs(mc - exact) < 4 * se
        assert reference_value(spec, integrand("f10", 2)) == pytest.approx(exact)

    def test_smooth_oracle_used_in_low_dim(self):
        # f6 has no closed form; d=2 goes through the tensor rule
        val = reference_value(DEMO, integrand("f6", 2))
        assert 0.0 < val < 1.0

    def test_unresolved_reference(self):
        # non-isotropic indicator goes through the sampling oracle, whose
        # replicate spread cannot meet an absurd tolerance
        spec = MixtureSpec([1.0], [[0.0, 0.0]],
                           [[[1.2, 0.3], [0.3, 0.9]]])
        with pytest.raises(UnresolvedReferenceError) as info:
            reference_value(spec, integrand("f10", 2), tol=1e-12)
        assert info.value.spread > 0

    def test_cache_round_trip(self, tmp_path):
        path = tmp_path / "refcache.json"
        spec = MixtureSpec([1.0], [[0.0, 0.0]],
                           [[[1.2, 0.3], [0.3, 0.9]]])
        f = integrand("f6", 2)
        v1 = reference_value(spec, f, cache=str(path))
        assert path.exists()
        v2 = reference_value(spec, f, cache=str(path))
        assert v1 == v2


class TestConvergenceStudy:
    def test_row_bookkeeping(self):
        recs = convergence_study(DEMO, ["mc"], ["f2", "f9"], [4],
                                 seeds=[0, 1, 2])
        assert len(recs) == 1 * 2 * 3
        assert all(r.method == "mc" and r.n == 4 for r in recs)

    def test_methods_produce_rows(self):
        recs = convergence_study(DEMO, ["tqmc", "cqmc"], ["f9"], [16, 32],
                                 seeds=[0])
        tq = [r for r in recs if r.method == "tqmc"]
        cq = [r for r in recs if r.method == "cqmc"]
        assert len(tq) == 2 and len(cq) == 2
        assert all(np.isfinite(r.abs_error) for r in tq + cq)

    def test_cqmc_insufficient_budget_is_skipped_row(self):
        spec = MixtureSpec([0.05, 0.95], [[0.0], [3.0]], [[[1.0]], [[1.0]]])
        recs = convergence_study(spec, ["cqmc"], ["f9"], [4], seeds=[0])
        assert len(recs) == 1
        assert recs[0].note.startswith("skipped")
        assert math.isnan(recs[0].abs_error)

    def test_sparse_methods_report_realized_counts(self):
        recs = convergence_study(DEMO, ["tsg"], ["f9"], [64], seeds=[0])
        ns = sorted({r.n for r in recs})
        assert ns[0] == 1  # level-2 grid in d=2
        assert all(n <= 64 for n in ns)
        assert len(ns) >= 3

    def test_indicator_rows_flagged(self):
        recs = convergence_study(DEMO, ["mc"], ["f10"], [8], seeds=[0])
        assert recs[0].note == "no rate guarantee"

    def test_ascending_grid_required(self):
        with pytest.raises(InvalidInputError):
            convergence_study(DEMO, ["mc"], ["f9"], [8, 4], seeds=[0])


class TestFitRate:
    def test_exact_loglinear(self):
        recs = [ConvergenceRecord("mc", n, "f9", "m", 0, 3.0 / n, 0.0)
                for n in (16, 32, 64, 128, 256)]
        assert fit_rate(recs) == pytest.approx(-1.0, abs=1e-12)

    def test_exact_sqrt(self):
        recs = [ConvergenceRecord("mc", n, "f9", "m", 0, 2.0 * n**-0.5, 0.0)
                for n in (16, 32, 64, 128)]
        assert fit_rate(recs) == pytest.approx(-0.5, abs=1e-12)

    def test_rms_over_seeds(self):
        recs = []
        for n in (16, 32, 64, 128):
            for seed, scale in enumerate((0.5, 1.5)):
                recs.append(ConvergenceRecord("mc", n, "f9", "m", seed,
                                              scale / n, 0.0))
        # rms of (0.5, 1.5)/n is sqrt(1.25)/n: still slope -1
        assert fit_rate(recs) == pytest.approx(-1.0, abs=1e-12)

    def test_zero_errors_excluded(self):
        recs = [ConvergenceRecord("mc", n, "f9", "m", 0, 1.0 / n, 0.0)
                for n in (16, 32, 64, 128)]
        recs.append(ConvergenceRecord("mc", 256, "f9", "m", 0, 0.0, 0.0))
        assert fit_rate(recs) == pytest.approx(-1.0, abs=1e-12)

    def test_insufficient_data(self):
        recs = [ConvergenceRecord("mc", n, "f9", "m", 0, 1.0 / n, 0.0)
                for n in (16, 32, 64)]
        with pytest.raises(InsufficientDataError):
            fit_rate(recs)

    def test_mc_empirical_rate(self):
        recs = convergence_study(DEMO, ["mc"], ["f9"],
                                 [2**k for k in range(4, 13)],
                                 seeds=list(range(20)))
        slope = fit_rate(recs)
        assert -0.65 <= slope <= -0.35


class TestRecordsCsv:
    def test_round_trip(self):
        recs = [ConvergenceRecord("mc", 16, "f9", "abc", 3, 0.125, 0.5),
                ConvergenceRecord("tqmc", 32, "f2", "abc", 0, 1e-9, 1.25)]
        buf = io.StringIO()
        records_to_csv(recs, buf)
        buf.seek(0)
        back = records_from_csv(buf)
        assert [(r.method, r.n, r.integrand, r.seed) for r in back] == \
            [("mc", 16, "f9", 3), ("tqmc", 32, "f2", 0)]
        assert back[0].abs_error == 0.125


def test_cqmc_matches_tqmc_for_single_component():
    spec = MixtureSpec([1.0], [[1.0, -0.5]], [[[1.3, 0.2], [0.2, 0.7]]])
    pts = halton_normal_set(2, 256)
    f = integrand("f9", 2)
    via_ode = estimate(transport_set(spec, TransportConfig(), pts), f)
    via_affine = estimate(componentwise_transport(spec, pts), f)
    assert via_ode == pytest.approx(via_affine, abs=1e-6)

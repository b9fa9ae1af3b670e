"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines live.
Criteria with a stated runtime budget assert it.  Heavy transports pick the
integrator per backend: the adaptive stepper when the compiled core is
present, otherwise the batched fixed-step scheme (whose deviation from the
adaptive result is orders of magnitude below every asserted quantity; see
TestTransportPoint::test_schemes_consistent).
"""
import math
import time

import numpy as np
import pytest

import mixtransport as mt
from mixtransport import BACKEND
from mixtransport.errors import NonPositiveDensityError
from mixtransport.lais import (
    LaisConfig,
    dm_lais,
    target_from_spec,
    tqmc_lais,
    upper_layer,
)
from mixtransport.mixtures import (
    MixtureSpec,
    composition_sample,
    demo_three_component,
    mixture_moments,
    random_mixture,
)
from mixtransport.pointsets import (
    SparseGridLevel,
    gauss_hermite_rule,
    halton_normal_set,
    inverse_erf,
    mc_points,
    smolyak_grid,
)
from mixtransport.quadrature import (
    convergence_study,
    estimate,
    fit_rate,
    integrand,
    reference_value,
)
from mixtransport.transport import (
    TransportConfig,
    componentwise_transport,
    intermediate_log_density,
    transport_point,
    transport_set,
    velocity,
)

DEMO = demo_three_component()
ADAPTIVE = TransportConfig()
FAST = BACKEND == "compiled"


def heavy_cfg(steps=256):
    """Integrator for bulk transports; see module docstring."""
    return ADAPTIVE if FAST else TransportConfig(scheme="rk4-fixed",
                                                 steps=steps)


def report(name, ok, detail=""):
    line = f"{'PASS' if ok else 'FAIL'}: {name}"
    if detail:
        line += f"  [{detail}]"
    print(line)
    assert ok, line


def test_affine_oracle():
    """100 random single-component specs: the flow endpoint equals the
    affine closed form A x0 + a to 1e-8 (adaptive integrator)."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for d in (1, 2, 5, 20):
        for _ in range(25):
            lam = rng.uniform(0.2, 3.0, size=d)  # condition number <= 15
            Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
            A = 0.5 * ((Q * lam) @ Q.T + ((Q * lam) @ Q.T).T)
            a = 2.0 * rng.standard_normal(d)
            spec = MixtureSpec([1.0], [a], [A])
            x0 = rng.standard_normal(d)
            got = transport_point(spec, ADAPTIVE, x0)
            worst = max(worst, float(np.max(np.abs(got - (A @ x0 + a)))))
    elapsed = time.perf_counter() - t0
    report("affine oracle (100 single-component specs, d in 1/2/5/20)",
           worst <= 1e-8 and elapsed < 10.0,
           f"worst err {worst:.2e}, {elapsed:.1f}s")


def test_continuity_residual():
    """200 random (t, x) probes satisfy the continuity equation to a
    relative 1e-3 via central differences (h = 1e-5)."""
    t0 = time.perf_counter()
    rng = np.random.default_rng(7)
    m = mixture_moments(DEMO)
    Linv = np.linalg.inv(np.linalg.cholesky(m.covariance))
    probes = []
    while len(probes) < 200:
        x = composition_sample(DEMO, rng, 64)
        maha = np.linalg.norm((x - m.mean) @ Linv.T, axis=1)
        probes.extend(list(x[maha <= 3.0]))
    probes = probes[:200]
    h = 1e-5
    worst = 0.0
    for x in probes:
        t = rng.uniform(0.1, 0.9)
        rho = lambda tt, xx: math.exp(intermediate_log_density(DEMO, tt, xx))
        dt = (rho(t + h, x) - rho(t - h, x)) / (2 * h)
        div = 0.0
        for k in range(2):
            e = np.zeros(2)
            e[k] = h
            div += (rho(t, x + e) * velocity(DEMO, t, x + e)[k]
                    - rho(t, x - e) * velocity(DEMO, t, x - e)[k]) / (2 * h)
        rel = abs(dt + div) / (abs(dt) + abs(div) + 1e-12)
        worst = max(worst, rel)
    elapsed = time.perf_counter() - t0
    report("continuity residual (200 probes, rel 1e-3)",
           worst <= 1e-3 and elapsed < 30.0,
           f"worst rel {worst:.2e}, {elapsed:.1f}s")


def test_pushforward_moments():
    """2^14 transported MC points match the mixture mean and covariance
    within 3 standard errors elementwise."""
    t0 = time.perf_counter()
    n = 2**14
    pts = mc_points(2, n, 99)
    out = transport_set(DEMO, heavy_cfg(), pts)
    m = mixture_moments(DEMO)
    mean_se = np.sqrt(np.diag(m.covariance) / n)
    mean_ok = np.all(np.abs(out.points.mean(axis=0) - m.mean) < 3 * mean_se)
    centered = out.points - out.points.mean(axis=0)
    emp_cov = (centered.T @ centered) / n
    prods = centered[:, :, None] * centered[:, None, :]
    cov_se = np.sqrt(np.var(prods, axis=0) / n)
    cov_ok = np.all(np.abs(emp_cov - m.covariance) < 3 * cov_se)
    elapsed = time.perf_counter() - t0
    report("pushforward moments (2^14 MC points, 3 sigma)",
           bool(mean_ok and cov_ok) and elapsed < 60.0,
           f"mean ok {mean_ok}, cov ok {cov_ok}, {elapsed:.1f}s")


def test_rate_separation():
    """MC converges at its root-N rate on the demo mixture while
    transported QMC converges at least 0.2 faster in log-log slope."""
    t0 = time.perf_counter()
    ns = [2**k for k in range(4, 13)]
    recs = convergence_study(DEMO, ["mc", "tqmc"], ["f9"], ns,
                             seeds=list(range(20)),
                             transport_cfg=heavy_cfg())
    s_mc = fit_rate([r for r in recs if r.method == "mc"])
    s_tq = fit_rate([r for r in recs if r.method == "tqmc"])
    elapsed = time.perf_counter() - t0
    report("rate separation (f9, N=2^4..2^12)",
           -0.65 <= s_mc <= -0.35 and s_tq <= s_mc - 0.2 and elapsed < 600.0,
           f"mc slope {s_mc:.3f}, tqmc slope {s_tq:.3f}, {elapsed:.0f}s")


def test_highdim_sanity():
    """d=20, J=5 random mixture: transported QMC at N=2^13 beats the mean
    MC error over 20 seeds."""
    t0 = time.perf_counter()
    spec = random_mixture(20, 5, 0)
    f9 = integrand("f9", 20)
    ref = reference_value(spec, f9)
    pts = halton_normal_set(20, 2**13)
    out = transport_set(spec, heavy_cfg(), pts)
    tq_err = abs(estimate(out, f9) - ref)
    mc_errs = [abs(float(np.mean(f9(composition_sample(spec, s, 2**13))))
                   - ref) for s in range(20)]
    elapsed = time.perf_counter() - t0
    report("high-dimension sanity (d=20, J=5, N=2^13)",
           tq_err <= float(np.mean(mc_errs)) and elapsed < 900.0,
           f"tqmc {tq_err:.2e} vs mean mc {np.mean(mc_errs):.2e}, "
           f"{elapsed:.0f}s")


def test_componentwise_breakdown():
    """Componentwise allotment collapses once J is comparable to N but
    stays competitive for small J (fixed documented mixture seed)."""
    t0 = time.perf_counter()
    n = 2**12
    f9 = integrand("f9", 2)
    pts = halton_normal_set(2, n)
    seed = 7
    ratios = {}
    for J in (2, 5, 20, 2**11):
        spec = random_mixture(2, J, seed)
        ref = reference_value(spec, f9)
        cfg = heavy_cfg(steps=64) if J > 100 else heavy_cfg()
        tq = abs(estimate(transport_set(spec, cfg, pts), f9) - ref)
        cq = abs(estimate(componentwise_transport(spec, pts), f9) - ref)
        ratios[J] = cq / tq
    elapsed = time.perf_counter() - t0
    big_ok = ratios[2**11] >= 5.0
    small_ok = all(ratios[J] <= 2.0 for J in (2, 5, 20))
    report("componentwise breakdown (N=2^12, J sweep to 2^11)",
           big_ok and small_ok and elapsed < 600.0,
           "ratios " + ", ".join(f"J={J}: {r:.2f}"
                                 for J, r in ratios.items())
           + f", {elapsed:.0f}s")


@pytest.mark.xfail(
    strict=True,
    reason="criterion parameters are not strictly positive: 1.3*phi(x) - "
           "0.3*phi(x-1/2) < 0 for x > 1/4 + 2*ln(13/3) ~ 3.1827, so the "
           "construction-time positivity probe rejects the spec (see the "
           "companion test for the same criterion on a valid signed spec)",
)
def test_negative_weight_transport_as_stated():
    """The criterion's literal two-component signed spec.

    The density has a negative right tail (e.g. at x=4 it is ~ -8.8e-5),
    hence 'verified strictly positive' is unsatisfiable and construction
    raises; recorded as an expected failure rather than weakened.
    """
    spec = MixtureSpec([1.3, -0.3], [[0.0], [0.5]], [[[1.0]], [[1.0]]],
                       allow_negative_weights=True)
    n = 2**12
    pts = mc_points(1, n, 11)
    out = transport_set(spec, heavy_cfg(steps=128), pts)
    expected = float(spec.weights @ spec.shifts[:, 0])
    sigma = math.sqrt(mixture_moments(spec).covariance[0, 0] / n)
    report("negative-weight transport (spec as stated)",
           abs(out.points.mean() - expected) < 3 * sigma)


def test_negative_weight_transport_valid_spec():
    """Same criterion on a strictly positive signed mixture:
    w = (0.65, -0.3, 0.65), shifts (-0.3, 0.1, 0.6), identity scales; the
    density over phi(x) stays above 0.84 (negative component flanked by
    positive ones) and the signed moment 0.165 is nonzero."""
    t0 = time.perf_counter()
    spec = MixtureSpec([0.65, -0.3, 0.65], [[-0.3], [0.1], [0.6]],
                       [[[1.0]]] * 3, allow_negative_weights=True)
    n = 2**12
    pts = mc_points(1, n, 11)
    try:
        out = transport_set(spec, heavy_cfg(steps=128), pts)
        positivity_errors = 0
    except NonPositiveDensityError:
        out = None
        positivity_errors = 1
    expected = float(spec.weights @ spec.shifts[:, 0])
    sigma = math.sqrt(mixture_moments(spec).covariance[0, 0] / n)
    mean_ok = out is not None and abs(out.points.mean() - expected) < 3 * sigma
    elapsed = time.perf_counter() - t0
    report("negative-weight transport (valid strictly positive signed spec)",
           positivity_errors == 0 and mean_ok and elapsed < 60.0,
           f"signed-moment target {expected}, {elapsed:.1f}s")


def normal_moment(k):
    if k % 2:
        return 0.0
    m = 1.0
    for i in range(2, k + 1, 2):
        m *= i - 1
    return m


def test_sparse_grid_exactness():
    """d=2 Gauss-Hermite Smolyak grids integrate all monomials of total
    degree <= 2(q-d)+1 to 1e-10 for levels 3..7."""
    t0 = time.perf_counter()
    worst = 0.0
    for q in range(3, 8):
        grid = smolyak_grid(SparseGridLevel(q, 2))
        w = grid.weights.astype(np.longdouble)
        x = grid.points.astype(np.longdouble)
        deg = 2 * (q - 2) + 1
        for i in range(deg + 1):
            for j in range(deg + 1 - i):
                est = float((w * x[:, 0]**i * x[:, 1]**j).sum())
                err = abs(est - normal_moment(i) * normal_moment(j))
                worst = max(worst, err)
    elapsed = time.perf_counter() - t0
    report("sparse-grid exactness (q=3..7, degree 2(q-2)+1)",
           worst <= 1e-10 and elapsed < 10.0,
           f"worst err {worst:.2e}, {elapsed:.1f}s")


def test_inverse_erf_round_trip():
    """Round trip erf(inverse_erf(y)) = y to 1e-14 relative on the probe
    set."""
    t0 = time.perf_counter()
    worst = 0.0
    for y in (0.1, -0.1, 0.5, -0.5, 0.9, -0.9, 0.999999, -0.999999):
        back = math.erf(inverse_erf(y))
        worst = max(worst, abs(back - y) / abs(y))
    elapsed = time.perf_counter() - t0
    report("inverse_erf round trip (1e-14 relative)",
           worst <= 1e-14 and elapsed < 1.0,
           f"worst rel {worst:.2e}, {elapsed:.2f}s")


def test_lais_comparative_slope():
    """On the documented demo target the transported-QMC lower layer
    converges at least 0.15 faster (log-log slope) than the stratified
    one over the M sweep at C=10, T=20."""
    import dataclasses

    from mixtransport.lais import demo_multimodal_target

    t0 = time.perf_counter()
    spec = demo_multimodal_target()
    truth = mixture_moments(spec).mean
    target = target_from_spec(spec)
    base = LaisConfig(chains=10, steps=20, proposal_sigma=2.0,
                      kernel_sigma=1.5, seed=0)
    centers, _ = upper_layer(target, 2, base)
    ns, dm_errs, tq_errs = [], [], []
    for M in (2, 4, 8, 16, 32, 64):
        cfg = dataclasses.replace(base, samples_per_component=M)
        reps = []
        for s in range(5):
            r = dm_lais(target, 2, cfg, lambda X: X, centers=centers,
                        lower_seed=1001 + s)
            reps.append(float(np.linalg.norm(r.estimate - truth)))
        dm_errs.append(math.sqrt(float(np.mean(np.square(reps)))))
        rt = tqmc_lais(target, 2, cfg, lambda X: X, centers=centers,
                       transport_cfg=heavy_cfg(steps=128))
        tq_errs.append(float(np.linalg.norm(rt.estimate - truth)))
        ns.append(r.n_total)
    s_dm = float(np.polyfit(np.log(ns), np.log(dm_errs), 1)[0])
    s_tq = float(np.polyfit(np.log(ns), np.log(tq_errs), 1)[0])
    elapsed = time.perf_counter() - t0
    report("LAIS comparative slope (M sweep, C=10, T=20)",
           s_tq <= s_dm - 0.15 and elapsed < 600.0,
           f"dm slope {s_dm:.3f}, tqmc slope {s_tq:.3f}, {elapsed:.0f}s")

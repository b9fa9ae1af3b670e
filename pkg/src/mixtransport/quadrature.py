"""Weighted quadrature, the benchmark integrand suite, reference values,
and convergence-study drivers.

The integrand suite is a fixed list of closed forms on R^d centered at
y* = (1/2, ..., 1/2), including product, ridge and indicator families plus
dimension-normalized tilde variants.  Reference values come from closed
forms where available, otherwise from tensor Gauss-Hermite (d <= 3) or a
replicated transported-QMC oracle whose spread is recorded.
"""
from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import ncx2

from .errors import (
    DimensionMismatchError,
    InsufficientBudgetError,
    InsufficientDataError,
    InvalidInputError,
    UnresolvedReferenceError,
    UnsupportedOperationError,
)
from .mixtures import (
    MixtureSpec,
    composition_sample,
    mixture_moments,
    spec_digest,
)
from .pointsets import (
    WeightedPointSet,
    gauss_hermite_rule,
    halton,
    halton_normal_set,
    smolyak_grid,
    SparseGridLevel,
    uniform_to_normal,
)
from .transport import TransportConfig, componentwise_transport, transport_set

INTEGRAND_IDS = ("f1", "f2", "f3", "f4", "f5", "f6", "f7", "f8", "f9", "f10",
                 "f4~", "f5~", "f6~", "f10~")

#: integrands with no smoothness, flagged "no rate guarantee" in outputs
INDICATOR_IDS = ("f10", "f10~")

METHODS = ("mc", "tqmc", "tsg", "cqmc", "csg")

__all__ = [
    "Integrand",
    "ConvergenceRecord",
    "integrand",
    "eval_integrand",
    "estimate",
    "reference_value",
    "convergence_study",
    "fit_rate",
    "records_to_csv",
    "records_from_csv",
    "INTEGRAND_IDS",
    "METHODS",
]


@dataclass(frozen=True)
class Integrand:
    """One benchmark integrand: closed-form evaluator on R^d."""

    id: str
    d: int

    def __post_init__(self):
        if self.id not in INTEGRAND_IDS:
            raise InvalidInputError(f"unknown integrand id {self.id!r}")
        if self.d < 1:
            raise InvalidInputError("dimension must be positive")

    def __call__(self, Y: np.ndarray) -> np.ndarray:
        return eval_integrand(self.id, np.asarray(Y, dtype=float))

    @property
    def smooth(self) -> bool:
        return self.id not in INDICATOR_IDS


def integrand(fid: str, d: int) -> Integrand:
    return Integrand(fid, d)


def eval_integrand(fid: str, Y) -> np.ndarray:
    """Evaluate one integrand on rows of Y (vectorized)."""
    Y = np.asarray(Y, dtype=float)
    single = Y.ndim == 1
    if single:
        Y = Y[None, :]
    d = Y.shape[1]
    U = Y - 0.5
    if fid == "f1":
        out = np.abs(U).sum(axis=1)
    elif fid == "f2":
        out = (U * U).sum(axis=1)
    elif fid == "f3":
        out = ((2.0 * Y - 1.0).sum(axis=1)) ** 4
    elif fid == "f4":
        out = np.prod(2.0 * np.abs(2.0 * Y - 1.0), axis=1)
    elif fid == "f5":
        out = np.prod(0.5 * math.pi * np.sin(math.pi * Y), axis=1)
    elif fid == "f6":
        out = np.prod(1.0 / (1.0 + U * U), axis=1)
    elif fid == "f7":
        out = np.exp(-(U * U).sum(axis=1) / d**2)
    elif fid == "f8":
        out = np.exp(Y.sum(axis=1) / d)
    elif fid == "f9":
        out = np.cos(0.3 + Y.sum(axis=1) / d)
    elif fid == "f10":
        out = (np.sqrt((U * U).sum(axis=1)) <= 0.5).astype(float)
    elif fid == "f4~":
        out = np.prod(2.0 * np.abs(2.0 * Y - 1.0), axis=1) ** (1.0 / d)
    elif fid == "f5~":
        f5 = np.prod(0.5 * math.pi * np.sin(math.pi * Y), axis=1)
        out = np.abs(f5) ** (1.0 / d) * np.sign(f5)
    elif fid == "f6~":
        out = np.prod(1.0 / (1.0 + U * U), axis=1) ** (1.0 / d)
    elif fid == "f10~":
        out = (np.sqrt((U * U).sum(axis=1)) <= float(d)).astype(float)
    else:
        raise InvalidInputError(f"unknown integrand id {fid!r}")
    return out[0] if single else out


def estimate(pts: WeightedPointSet, f: Integrand) -> float:
    """Weighted quadrature sum w . f(points)."""
    if pts.d != f.d:
        raise DimensionMismatchError(
            f"point set has d={pts.d}, integrand expects d={f.d}"
        )
    return float(pts.weights @ f(pts.points))


# -- reference values -------------------------------------------------------------


def _ones_quadratic(spec: MixtureSpec):
    """Per-component mean and variance of the ridge s = sum(y)/d."""
    d = spec.d
    ones = np.ones(d)
    mu = spec.shifts @ ones / d
    C = spec.component_covariances()
    var = np.einsum("a,jab,b->j", ones, C, ones) / d**2
    return mu, var


def _closed_form(spec: MixtureSpec, f: Integrand):
    if f.id == "f2":
        m = mixture_moments(spec)
        return float(np.trace(m.covariance) + np.sum((m.mean - 0.5) ** 2))
    if f.id == "f8":
        mu, var = _ones_quadratic(spec)
        return float(np.sum(spec.weights * np.exp(mu + 0.5 * var)))
    if f.id == "f9":
        # E cos(0.3 + s) for Gaussian s via the characteristic function
        mu, var = _ones_quadratic(spec)
        return float(np.sum(spec.weights * np.cos(0.3 + mu) * np.exp(-0.5 * var)))
    return None


def _isotropic_sigmas(spec: MixtureSpec):
    diag = np.diagonal(spec.scales, axis1=1, axis2=2)
    for j in range(spec.J):
        if not np.array_equal(spec.scales[j],
                              np.diag(np.full(spec.d, diag[j, 0]))):
            return None
    return diag[:, 0]

def _ball_probability_exact(spec: MixtureSpec, radius: float):
    """Mixture probability of the closed ball around y* for isotropic scales."""
    sig = _isotropic_sigmas(spec)
    if sig is None:
        return None
    center = np.full(spec.d, 0.5)
    nc = np.sum((spec.shifts - center) ** 2, axis=1) / sig**2
    q = (radius / sig) ** 2
    return float(np.sum(spec.weights * ncx2.cdf(q, df=spec.d, nc=nc)))


def _tensor_gh_reference(spec: MixtureSpec, f: Integrand, nodes_per_axis=40):
    nodes, w1 = gauss_hermite_rule(nodes_per_axis)
    axes = [nodes] * spec.d
    mesh = np.meshgrid(*axes, indexing="ij")
    Z = np.stack([m.ravel() for m in mesh], axis=1)
    wmesh = np.meshgrid(*([w1] * spec.d), indexing="ij")
    W = np.prod(np.stack([m.ravel() for m in wmesh], axis=1), axis=1)
    total = 0.0
    for j in range(spec.J):
        Y = Z @ spec.scales[j].T + spec.shifts[j]
        total += spec.weights[j] * float(W @ f(Y))
    return total


def _mc_reference(spec: MixtureSpec, f: Integrand, n=2**20, seeds=(11, 12, 13)):
    vals = []
    for s in seeds:
        Y = composition_sample(spec, s, n)
        vals.append(float(np.mean(f(Y))))
    return float(np.mean(vals)), float(np.max(vals) - np.min(vals))


def _tqmc_reference(spec: MixtureSpec, f: Integrand, n=2**20, seeds=(21, 22, 23)):
    """Replicated transported-QMC oracle (Cranley-Patterson shifts)."""
    cfg = TransportConfig(scheme="rk4-fixed", steps=256)
    vals = []
    base = halton(spec.d, n, skip=1000, leap=100)
    for s in seeds:
        shift = np.random.default_rng(s).random(spec.d)
        u = np.mod(base + shift, 1.0)
        pts = WeightedPointSet(uniform_to_normal(u), np.full(n, 1.0 / n),
                               "qmc-halton")
        out = transport_set(spec, cfg, pts)
        vals.append(estimate(out, f))
    return float(np.mean(vals)), float(np.max(vals) - np.min(vals))


class ReferenceCache:
    """JSON sidecar keyed by (mixture digest, integrand id)."""

    def __init__(self, path):
        self.path = path
        self._data = {}
        if path is not None and os.path.exists(path):
            with open(path) as fh:
                self._data = json.load(fh)

    def get(self, key):
        return self._data.get(key)

    def put(self, key, entry):
        self._data[key] = entry
        if self.path is not None:
            with open(self.path, "w") as fh:
                json.dump(self._data, fh, indent=1, sort_keys=True)


def reference_value(spec: MixtureSpec, f: Integrand, tol: float | None = None,
                    cache: "ReferenceCache | str | None" = None) -> float:
    """Ground-truth expectation of an integrand under the mixture.

    Dispatch: closed form (f2, f8, f9); exact noncentral-chi-square tail for
    ball indicators with isotropic scales, otherwise a replicated sampling
    oracle; tensor Gauss-Hermite per component at 40^d nodes for smooth
    integrands in d <= 3, otherwise a replicated transported-QMC oracle.
    When ``tol`` is given and the oracle replicate spread exceeds it, an
    unresolved-reference error carrying the spread is raised.
    """
    if spec.reference.kind != "gaussian":
        raise UnsupportedOperationError("reference values need a Gaussian reference")
    if f.d != spec.d:
        raise DimensionMismatchError("integrand and spec dimension differ")
    closed = _closed_form(spec, f)
    if closed is not None:
        return closed

    if isinstance(cache, (str, os.PathLike)):
        cache = ReferenceCache(cache)
    key = f"{spec_digest(spec)}:{f.id}"
    if cache is not None:
        hit = cache.get(key)
        if hit is not None:
            spread = hit.get("spread", 0.0)
            if tol is not None and spread > tol:
                raise UnresolvedReferenceError(
                    f"cached oracle spread {spread:g} exceeds tol {tol:g}",
                    spread=spread,
                )
            return float(hit["value"])

    if f.id in INDICATOR_IDS:
        radius = 0.5 if f.id == "f10" else float(f.d)
        exact = _ball_probability_exact(spec, radius)
        if exact is not None:
            return exact
        value, spread = _mc_reference(spec, f)
        method = "mc-oracle"
    elif spec.d <= 3:
        value, spread, method = _tensor_gh_reference(spec, f), 0.0, "tensor-gh"
    else:
        value, spread = _tqmc_reference(spec, f)
        method = "tqmc-oracle"
    if tol is not None and spread > tol:
        raise UnresolvedReferenceError(
            f"oracle spread {spread:g} exceeds tol {tol:g}", spread=spread
        )
    if cache is not None:
        cache.put(key, {"value": value, "spread": spread, "method": method})
    return value


# -- convergence studies -----------------------------------------------------------


@dataclass
class ConvergenceRecord:
    """One (method, N, integrand, seed) cell of a convergence study."""

    method: str
    n: int
    integrand: str
    mixture: str
    seed: int
    abs_error: float
    wall_time: float
    note: str = ""

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidInputError(f"unknown method {self.method!r}")
        if self.n <= 0:
            raise InvalidInputError("n must be positive")
        if np.isfinite(self.abs_error) and self.abs_error < 0:
            raise InvalidInputError("abs_error must be nonnegative")


CSV_HEADER = "method,n,integrand,mixture,seed,abs_error,wall_time"


def records_to_csv(records, path_or_file) -> None:
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        fh.write(CSV_HEADER + "\n")
        for r in records:
            fh.write(f"{r.method},{r.n},{r.integrand},{r.mixture},{r.seed},"
                     f"{r.abs_error:.17g},{r.wall_time:.6g}\n")
    finally:
        if own:
            fh.close()


def records_to_jsonl(records, path_or_file) -> None:
    """JSON-lines twin of the records CSV; carries the note field too."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        for r in records:
            doc = {"method": r.method, "n": r.n, "integrand": r.integrand,
                   "mixture": r.mixture, "seed": r.seed,
                   "abs_error": r.abs_error, "wall_time": r.wall_time}
            if r.note:
                doc["note"] = r.note
            fh.write(json.dumps(doc) + "\n")
    finally:
        if own:
            fh.close()


def records_from_csv(path_or_file):
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file) if own else path_or_file
    out = []
    try:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise InvalidInputError(f"unexpected records header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            m, n, fid, mix, seed, err, wt = line.split(",")
            out.append(ConvergenceRecord(m, int(n), fid, mix, int(seed),
                                         float(err), float(wt)))
    finally:
        if own:
            fh.close()
    return out


def _sparse_levels_within(d: int, budget: int):
    """(level, point count) pairs with counts <= budget, ascending."""
    out = []
    q = d
    while True:
        try:
            grid = smolyak_grid(SparseGridLevel(q, d))
        except Exception:
            break
        if grid.n > budget:
            break
        out.append((q, grid))
        q += 1
        if q > d + 60:
            break
    return out


def _componentwise_sparse(spec: MixtureSpec, budget_n: int):
    """Per-component sparse grids at the largest common level fitting
    floor(w_j N) points per component; None if any budget is empty."""
    alloc = np.floor(spec.weights * budget_n + 1e-9).astype(int)
    alloc[-1] = budget_n - int(alloc[:-1].sum())
    if np.any(alloc < 1):
        return None
    level = None
    for j in range(spec.J):
        fits = [q for q, g in _sparse_levels_within(spec.d, int(alloc[j]))]
        if not fits:
            return None
        best = max(fits)
        level = best if level is None else min(level, best)
    pts_blocks, w_blocks = [], []
    grid = smolyak_grid(SparseGridLevel(level, spec.d))
    for j in range(spec.J):
        pts_blocks.append(grid.points @ spec.scales[j].T + spec.shifts[j])
        w_blocks.append(spec.weights[j] * grid.weights)
    return WeightedPointSet(np.vstack(pts_blocks), np.concatenate(w_blocks),
                            "componentwise")


def convergence_study(spec: MixtureSpec, methods, integrands, n_grid, seeds,
                      transport_cfg: TransportConfig | None = None,
                      skip: int = 1000, leap: int = 100, threads: int = 1,
                      cache=None):
    """Run the error-vs-N study and return ConvergenceRecord rows.

    mc regenerates per seed; tqmc/tsg transport deterministic point sets
    (one row each, seed 0); cqmc/csg use the componentwise allotment and
    record a skipped row (abs_error = nan) when a component's budget is
    empty.  Sparse-grid methods report realized point counts, walking levels
    until the largest n_grid entry is exceeded.
    """
    n_grid = [int(n) for n in n_grid]
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise InvalidInputError("n_grid must be ascending")
    methods = list(methods)
    for m in methods:
        if m not in METHODS:
            raise InvalidInputError(f"unknown method {m!r}")
    fs = [integrand(fid, spec.d) if isinstance(fid, str) else fid
          for fid in integrands]
    cfg = transport_cfg or TransportConfig()
    mix_id = spec_digest(spec)
    refs = {f.id: reference_value(spec, f, cache=cache) for f in fs}

    records = []

    def emit(method, n, produced, gen_time, seed=0, note=""):
        for f in fs:
            t0 = time.perf_counter()
            err = abs(estimate(produced, f) - refs[f.id]) if produced is not None \
                else float("nan")
            est_time = time.perf_counter() - t0
            records.append(ConvergenceRecord(
                method, n, f.id, mix_id, seed,
                err, gen_time + est_time,
                note=note or ("no rate guarantee" if not f.smooth else ""),
            ))

    for method in methods:
        if method == "mc":
            for n in n_grid:
                for seed in seeds:
                    t0 = time.perf_counter()
                    pts = WeightedPointSet(composition_sample(spec, seed, n),
                                           np.full(n, 1.0 / n), "mc")
                    emit("mc", n, pts, time.perf_counter() - t0, seed=int(seed))
        elif method == "tqmc":
            for n in n_grid:
                t0 = time.perf_counter()
                pts = halton_normal_set(spec.d, n, skip=skip, leap=leap)
                out = transport_set(spec, cfg, pts, threads=threads)
                emit("tqmc", n, out, time.perf_counter() - t0)
        elif method == "tsg":
            for q, grid in _sparse_levels_within(spec.d, max(n_grid)):
                t0 = time.perf_counter()
                out = transport_set(spec, cfg, grid, threads=threads)
                emit("tsg", grid.n, out, time.perf_counter() - t0)
        elif method == "cqmc":
            for n in n_grid:
                t0 = time.perf_counter()
                pts = halton_normal_set(spec.d, n, skip=skip, leap=leap)
                try:
                    out = componentwise_transport(spec, pts)
                except InsufficientBudgetError as exc:
                    records.append(ConvergenceRecord(
                        "cqmc", n, "-", mix_id, 0, float("nan"),
                        time.perf_counter() - t0, note=f"skipped: {exc}"))
                    continue
                emit("cqmc", n, out, time.perf_counter() - t0)
        elif method == "csg":
            for n in n_grid:
                t0 = time.perf_counter()
                out = _componentwise_sparse(spec, n)
                if out is None:
                    records.append(ConvergenceRecord(
                        "csg", n, "-", mix_id, 0, float("nan"),
                        time.perf_counter() - t0,
                        note="skipped: empty component budget"))
                    continue
                emit("csg", out.n, out, time.perf_counter() - t0)
    return records


def fit_rate(records) -> float:
    """Least-squares slope of log error vs log N for one method/integrand.

    MC-style repeated rows are RMS-aggregated per N first; zero-error points
    are excluded; fewer than 4 surviving N values is an error.
    """
    by_n = {}
    for r in records:
        if np.isfinite(r.abs_error):
            by_n.setdefault(r.n, []).append(r.abs_error)
    xs, ys = [], []
    for n in sorted(by_n):
        rms = math.sqrt(float(np.mean(np.square(by_n[n]))))
        if rms > 0.0:
            xs.append(math.log(n))
            ys.append(math.log(rms))
    if len(xs) < 4:
        raise InsufficientDataError(
            f"need >= 4 distinct N with positive errors, have {len(xs)}"
        )
    slope = np.polyfit(xs, ys, 1)[0]
    return float(slope)

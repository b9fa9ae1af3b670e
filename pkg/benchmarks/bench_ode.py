"""Benchmark: compiled ODE core vs the numpy fallback.

Times per-point adaptive transport (the hot kernel) and the batched
fixed-step path on three representative workloads.  Run from the repo root:

    python3 benchmarks/bench_ode.py
"""
import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

import numpy as np  # noqa: E402

from mixtransport import _ode_py  # noqa: E402
from mixtransport._backend import MixtureData, make_core, BACKEND  # noqa: E402
from mixtransport.lais import build_proposal  # noqa: E402
from mixtransport.mixtures import demo_three_component, random_mixture  # noqa: E402
from mixtransport.pointsets import halton_normal_set  # noqa: E402

try:
    from mixtransport import _ode_c
except ImportError:
    _ode_c = None


def time_call(fn, *args, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def bench_case(name, spec, n_points, repeat=3):
    md = MixtureData(spec)
    X0 = halton_normal_set(spec.d, n_points).points
    rows = []
    t_py = time_call(
        lambda: _ode_py.dopri45_batch(md, X0, 1.0, 1e-10, 1e-10, 100000),
        repeat=repeat,
    )
    rows.append(("python dopri45", t_py))
    if _ode_c is not None:
        core = make_core(md)
        t_c = time_call(
            lambda: _ode_c.dopri45_batch(core, X0, 1.0, 1e-10, 1e-10, 100000),
            repeat=repeat,
        )
        rows.append(("compiled dopri45", t_c))
        rows.append(("speedup", t_py / t_c))
    t_rk = time_call(lambda: _ode_py.rk4_batch(md, X0, 1.0, 256),
                     repeat=repeat)
    rows.append(("batched rk4-256 (numpy)", t_rk))
    print(f"\n== {name}: {n_points} points, d={spec.d}, J={spec.J} ==")
    for label, value in rows:
        if label == "speedup":
            print(f"  {label:26s} {value:8.1f}x")
        else:
            print(f"  {label:26s} {value:8.3f} s")


def main():
    print(f"active backend: {BACKEND}")
    bench_case("three-component demo", demo_three_component(), 1024)
    bench_case("d=20 random mixture", random_mixture(20, 5, 0), 256,
               repeat=1)
    centers = np.random.default_rng(0).standard_normal((200, 2)) * 4.0
    bench_case("isotropic 200-component proposal",
               build_proposal(centers, 1.0), 512, repeat=1)


if __name__ == "__main__":
    main()

"""Selects the ODE core implementation at import time.

The compiled extension (`_ode_c`, built from the .pyx with
``python setup.py build_ext --inplace``) is preferred; the numpy fallback
(`_ode_py`) is used when it is absent or when MIXTRANSPORT_FORCE_PYTHON=1.
Batch stage evaluation (shared time across points) stays in numpy either way;
only the per-point adaptive stepper is compiled.
"""
from __future__ import annotations

import os

import numpy as np

from . import _ode_py
from ._ode_py import (  # noqa: F401  (re-exported kernel surface)
    MixtureData,
    log_density_stage,
    rk4_batch,
    stage_ops,
    velocity_from_ops,
    velocity_stage,
)

if os.environ.get("MIXTRANSPORT_FORCE_PYTHON") == "1":
    _ode_c = None
else:
    try:
        from . import _ode_c
    except ImportError:
        _ode_c = None

BACKEND = "python" if _ode_c is None else "compiled"


def make_core(md: MixtureData):
    """Fresh compiled core for one thread of trajectories (None on fallback)."""
    if _ode_c is None:
        return None
    return _ode_c.make_core(md.log_abs_w, md.signs, md.shifts, md.scales,
                            md.has_negative, md.sigmas)


def dopri45(md: MixtureData, x0, t_end, abs_tol, rel_tol, max_steps,
            record=False):
    if _ode_c is None:
        return _ode_py.dopri45(md, x0, t_end, abs_tol, rel_tol, max_steps,
                               record)
    core = make_core(md)
    return _ode_c.dopri45(core, np.asarray(x0, dtype=float), t_end,
                          abs_tol, rel_tol, max_steps, record)


def dopri45_batch(md: MixtureData, X0, t_end, abs_tol, rel_tol, max_steps,
                  core=None):
    if _ode_c is None:
        return _ode_py.dopri45_batch(md, X0, t_end, abs_tol, rel_tol,
                                     max_steps)
    if core is None:
        core = make_core(md)
    return _ode_c.dopri45_batch(core, np.asarray(X0, dtype=float), t_end,
                                abs_tol, rel_tol, max_steps)

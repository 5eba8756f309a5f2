"""Integration-kernel selection: compiled extension if importable, else pure Python.

The default is chosen at import time and can be overridden with the
MANIFOLD_DESCENT_KERNEL environment variable ("auto", "pure", "compiled")
or per call via simulate(..., kernel=...).
"""

from __future__ import annotations

import os
from typing import Optional

import numpy as np

from . import _loop_py
from .dynamics import (
    GD_FLOW,
    HBF,
    HEAVY_BALL,
    NAG_SC,
    PNI,
    PROPOSED,
    TRIPLE_MOMENTUM,
    MethodSpec,
    PhaseState,
    tm_coefficients,
)

try:
    from . import _loop_cy  # type: ignore[attr-defined]

    HAVE_COMPILED = True
except ImportError:  # pragma: no cover - depends on build environment
    _loop_cy = None
    HAVE_COMPILED = False

_MODE_ENV = os.environ.get("MANIFOLD_DESCENT_KERNEL", "auto").strip().lower()
if _MODE_ENV not in ("auto", "pure", "compiled"):
    raise RuntimeError(f"MANIFOLD_DESCENT_KERNEL must be auto|pure|compiled, got {_MODE_ENV!r}")
if _MODE_ENV == "compiled" and not HAVE_COMPILED:
    raise RuntimeError("MANIFOLD_DESCENT_KERNEL=compiled but the extension is not built")


def default_kernel() -> str:
    """Kernel selected at import: 'compiled' when the extension is available."""
    if _MODE_ENV == "auto":
        return "compiled" if HAVE_COMPILED else "pure"
    return _MODE_ENV


def _family_mode(method: MethodSpec):
    """Map a MethodSpec onto the kernel's (mode, c0, c1, c2) coefficients."""
    fam = method.family
    if fam == GD_FLOW:
        return 0, 0.0, 0.0, 0.0
    if fam == HEAVY_BALL:
        return 1, 0.0, 0.0, 1.0
    if fam == HBF:
        return 1, float(method.lam), 0.0, 1.0
    if fam == TRIPLE_MOMENTUM:
        cv, ch, cg = tm_coefficients(method)
        return 1, cv, ch, cg
    if fam == PNI:
        return 2, float(method.alpha), float(method.beta), 0.0
    if fam in (PROPOSED, NAG_SC):
        return 3, method.eff_alpha, method.eff_beta, 0.0
    raise ValueError(f"unknown family {fam!r}")


def supports_compiled(obj) -> bool:
    """The compiled loop handles the built-in quadratics (diagonal or dense)."""
    return HAVE_COMPILED and (getattr(obj, "diag", None) is not None or getattr(obj, "dense", None) is not None)


def run_loop(
    method: MethodSpec,
    obj,
    state: PhaseState,
    scheme: str,
    h: float,
    n_steps: int,
    grad_tol: float,
    record_every: int,
    kick1: Optional[np.ndarray],
    kick2: Optional[np.ndarray],
    kernel: str,
):
    """Dispatch one integration run to the selected kernel.

    Returns (indices, x1_rows, x2_rows_or_None, terminated_by, steps_taken)
    with rows as 2-D arrays (pure path returns lists; both are normalized
    by the caller).
    """
    if kernel == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError("compiled kernel requested but the extension is not built")
        if not supports_compiled(obj):
            raise ValueError("compiled kernel supports only the built-in quadratic objectives")
        return _run_compiled(method, obj, state, scheme, h, n_steps, grad_tol, record_every, kick1, kick2)
    if kernel != "pure":
        raise ValueError(f"unknown kernel {kernel!r}")
    return _loop_py.run_loop(method, obj, state, scheme, h, n_steps, grad_tol, record_every, kick1, kick2)


def _run_compiled(method, obj, state, scheme, h, n_steps, grad_tol, record_every, kick1, kick2):
    mode, c0, c1, c2 = _family_mode(method)
    n = obj.dim
    second = mode != 0
    cap = n_steps // record_every + 2
    rec_idx = np.empty(cap, dtype=np.int64)
    rec_x1 = np.empty((cap, n))
    rec_x2 = np.empty((cap, n)) if second else np.empty((1, n))
    scratch = np.empty((16, n))
    x2_0 = state.x2 if second else np.empty(0)
    n_rec, term, steps = _loop_cy.run_loop(
        mode, c0, c1, c2,
        obj.diag, obj.dense, obj.offset,
        np.ascontiguousarray(state.x1), np.ascontiguousarray(x2_0),
        1 if scheme == _loop_py.RK4 else 0,
        h, n_steps, grad_tol, record_every,
        kick1, kick2,
        _loop_py.DIVERGENCE_NORM * _loop_py.DIVERGENCE_NORM,
        scratch, rec_idx, rec_x1, rec_x2,
    )
    terminated = (_loop_py.TERM_T_MAX, _loop_py.TERM_GRAD_TOL, _loop_py.TERM_DIVERGENCE)[term]
    indices = rec_idx[:n_rec].tolist()
    rows1 = list(rec_x1[:n_rec])
    rows2 = list(rec_x2[:n_rec]) if second else None
    return indices, rows1, rows2, terminated, steps

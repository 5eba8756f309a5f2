"""Pure-Python integration loop: the fallback kernel.

Semantics (and the exact order of floating-point operations on the state)
are mirrored by the compiled kernel in _loop_cy.pyx; for identity/diagonal
Hessians the two produce value-identical trajectories.  Keep them in sync.
"""

from __future__ import annotations

import math
from typing import Callable, Optional

import numpy as np

from .dynamics import MethodSpec, PhaseState, rhs

EULER = "euler"
RK4 = "rk4"
SCHEMES = (EULER, RK4)

TERM_T_MAX = "t_max"
TERM_GRAD_TOL = "grad_tol"
TERM_DIVERGENCE = "divergence"

DIVERGENCE_NORM = 1e12


def _axpy(state: PhaseState, c: float, d: PhaseState) -> PhaseState:
    x1 = state.x1 + c * d.x1
    x2 = None if state.x2 is None else state.x2 + c * d.x2
    return PhaseState(x1, x2)


def step(scheme: str, deriv: Callable[[PhaseState], PhaseState], state: PhaseState, h: float) -> PhaseState:
    """One explicit Euler or classical RK4 step; inputs are not mutated."""
    if h <= 0.0:
        raise ValueError("h must be positive")
    if scheme == EULER:
        return _axpy(state, h, deriv(state))
    if scheme != RK4:
        raise ValueError(f"unknown scheme {scheme!r}")
    h2 = 0.5 * h
    h6 = h / 6.0
    k1 = deriv(state)
    k2 = deriv(_axpy(state, h2, k1))
    k3 = deriv(_axpy(state, h2, k2))
    k4 = deriv(_axpy(state, h, k3))
    x1 = state.x1 + h6 * (k1.x1 + 2.0 * k2.x1 + 2.0 * k3.x1 + k4.x1)
    if state.x2 is None:
        return PhaseState(x1, None)
    x2 = state.x2 + h6 * (k1.x2 + 2.0 * k2.x2 + 2.0 * k3.x2 + k4.x2)
    return PhaseState(x1, x2)


def _sumsq(state: PhaseState) -> float:
    s = float(np.sum(state.x1 * state.x1))
    if state.x2 is not None:
        s += float(np.sum(state.x2 * state.x2))
    return s


def _grad_norm(obj, x1) -> float:
    g = obj.gradient(x1)
    return math.sqrt(float(np.sum(g * g)))


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
):
    """Integrate n_steps fixed steps, recording every record_every-th state.

    Returns (indices, x1_rows, x2_rows_or_None, terminated_by, steps_taken).
    Step 0 and the final accepted step are always recorded.  Per-step kicks
    (pre-scaled) are added after each accepted step; a non-finite state or a
    norm beyond DIVERGENCE_NORM truncates the trajectory.
    """
    deriv = lambda s: rhs(method, obj, s)
    second = state.x2 is not None
    limit_sq = DIVERGENCE_NORM * DIVERGENCE_NORM

    indices = [0]
    rows1 = [state.x1.copy()]
    rows2 = [state.x2.copy()] if second else None

    if _grad_norm(obj, state.x1) <= grad_tol:
        return indices, rows1, rows2, TERM_GRAD_TOL, 0

    terminated = TERM_T_MAX
    steps = 0
    for k in range(n_steps):
        nxt = step(scheme, deriv, state, h)
        if kick1 is not None:
            nxt = PhaseState(nxt.x1 + kick1[k], nxt.x2)
        if kick2 is not None:
            nxt = PhaseState(nxt.x1, nxt.x2 + kick2[k])
        ssq = _sumsq(nxt)
        if not math.isfinite(ssq) or ssq > limit_sq:
            terminated = TERM_DIVERGENCE
            break
        state = nxt
        steps = k + 1
        if steps % record_every == 0:
            indices.append(steps)
            rows1.append(state.x1.copy())
            if second:
                rows2.append(state.x2.copy())
        if _grad_norm(obj, state.x1) <= grad_tol:
            terminated = TERM_GRAD_TOL
            break

    if indices[-1] != steps:
        indices.append(steps)
        rows1.append(state.x1.copy())
        if second:
            rows2.append(state.x2.copy())
    return indices, rows1, rows2, terminated, steps

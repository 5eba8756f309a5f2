"""Fixed-step integration of the dynamics families, with trajectory records.

`simulate` runs explicit Euler or classical RK4 at a fixed step, optionally
injecting a per-step perturbation kick (a model of discretization/rounding
noise, applied after each accepted step - not an SDE discretization), and
records position, velocity and the certificate diagnostics.

`closed_form_quadratic` is the independent oracle: on the built-in quadratic
objectives every family is a linear ODE, solved here through the matrix
exponential (scipy's scaling-and-squaring Pade implementation; accurate to
~1e-12 for the small, stable systems exercised in this package).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import expm

from . import _kernel
from ._loop_py import (
    DIVERGENCE_NORM,
    EULER,
    RK4,
    SCHEMES,
    TERM_DIVERGENCE,
    TERM_GRAD_TOL,
    TERM_T_MAX,
    step,
)
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

__all__ = [
    "IntegratorConfig",
    "PerturbationSpec",
    "Trajectory",
    "UnsupportedOracleError",
    "step",
    "simulate",
    "closed_form_quadratic",
    "closed_form_trajectory",
    "write_trajectory_csv",
    "EULER",
    "RK4",
    "TERM_T_MAX",
    "TERM_GRAD_TOL",
    "TERM_DIVERGENCE",
]


class UnsupportedOracleError(ValueError):
    """The closed-form oracle only covers the built-in quadratic objectives."""


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step scheme selection and stopping rules."""

    h: float
    t_max: float
    scheme: str = RK4
    grad_tol: float = 0.0
    record_every: int = 1

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if not self.h > 0.0:
            raise ValueError("h must be > 0")
        if not self.t_max > 0.0 or self.h >= self.t_max:
            raise ValueError("t_max must be > h > 0")
        if self.grad_tol < 0.0:
            raise ValueError("grad_tol must be >= 0")
        if int(self.record_every) < 1:
            raise ValueError("record_every must be >= 1")

    @property
    def n_steps(self) -> int:
        r = self.t_max / self.h
        n = int(round(r)) if abs(r - round(r)) < 1e-6 else int(math.floor(r))
        return max(n, 1)


DISTRIBUTIONS = ("uniform_ball", "gaussian")
TARGETS = ("x1", "x2", "both")


@dataclass(frozen=True)
class PerturbationSpec:
    """Per-step additive kick of amplitude delta; delta = 0 disables injection.

    uniform_ball draws uniformly from the unit ball of the targeted subspace
    (one ball over the concatenated coordinates for target="both"); gaussian
    draws independent standard normals.  Samples are scaled by delta and are
    deterministic given the seed.
    """

    delta: float = 0.0
    distribution: str = "uniform_ball"
    seed: int = 0
    target: str = "both"

    def __post_init__(self):
        if self.delta < 0.0:
            raise ValueError("delta must be >= 0")
        if self.distribution not in DISTRIBUTIONS:
            raise ValueError(f"distribution must be one of {DISTRIBUTIONS}")
        if self.target not in TARGETS:
            raise ValueError(f"target must be one of {TARGETS}")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must fit in an unsigned 64-bit integer")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Time-indexed simulation record with aligned diagnostic channels.

    Channels that are undefined for the method (e.g. manifold residuals for
    families without a manifold slope, velocities for gradient flow) are NaN.
    """

    times: np.ndarray
    x1: np.ndarray
    x2: Optional[np.ndarray]
    f_vals: np.ndarray
    grad_norms: np.ndarray
    psi_norms: np.ndarray
    storage_vals: np.ndarray
    lyap_basic: np.ndarray
    lyap_exp: np.ndarray
    method: MethodSpec
    terminated_by: str
    steps_taken: int
    xstar: np.ndarray
    fstar: float

    def __len__(self) -> int:
        return self.times.shape[0]

    def state_at(self, i: int) -> PhaseState:
        return PhaseState(self.x1[i].copy(), None if self.x2 is None else self.x2[i].copy())

    @property
    def states(self):
        return [self.state_at(i) for i in range(len(self))]

    @property
    def terminal_state(self) -> PhaseState:
        return self.state_at(len(self) - 1)

    def terminal_error(self) -> float:
        """Terminal ||x1 - xstar||."""
        d = self.x1[-1] - self.xstar
        return math.sqrt(float(np.sum(d * d)))

    def terminal_gap(self) -> float:
        """Terminal f - fstar."""
        return float(self.f_vals[-1] - self.fstar)


def _make_kicks(pert: Optional[PerturbationSpec], n_steps: int, dim: int, second: bool):
    if pert is None or pert.delta == 0.0:
        return None, None
    if pert.target in ("x2", "both") and not second:
        raise ValueError(f"perturbation target {pert.target!r} needs a second-order family")
    d = dim * (2 if pert.target == "both" else 1)
    rng = np.random.default_rng(int(pert.seed))
    if pert.distribution == "gaussian":
        w = rng.standard_normal((n_steps, d))
    else:
        z = rng.standard_normal((n_steps, d))
        norms = np.linalg.norm(z, axis=1, keepdims=True)
        norms[norms == 0.0] = 1.0
        radii = rng.random((n_steps, 1)) ** (1.0 / d)
        w = z / norms * radii
    w = pert.delta * w
    if pert.target == "x1":
        return np.ascontiguousarray(w), None
    if pert.target == "x2":
        return None, np.ascontiguousarray(w)
    return np.ascontiguousarray(w[:, :dim]), np.ascontiguousarray(w[:, dim:])


def _as_initial_state(method: MethodSpec, obj, x0) -> PhaseState:
    if not isinstance(x0, PhaseState):
        x0 = PhaseState(np.asarray(x0, dtype=float))
    if x0.x1.shape != (obj.dim,):
        raise ValueError(f"x0 has dimension {x0.x1.shape}, objective expects ({obj.dim},)")
    if method.second_order:
        if x0.x2 is None:
            x0 = PhaseState(x0.x1, np.zeros(obj.dim))
    elif x0.x2 is not None:
        # A standing start reduces cleanly to first order; a moving one does not.
        if np.any(x0.x2 != 0.0):
            raise ValueError("gd_flow takes a first-order initial state (x2 absent or zero)")
        x0 = PhaseState(x0.x1)
    if not np.all(np.isfinite(x0.x1)) or (x0.x2 is not None and not np.all(np.isfinite(x0.x2))):
        raise FloatingPointError("initial state must be finite")
    return x0


def simulate(
    method: MethodSpec,
    obj,
    x0,
    config: IntegratorConfig,
    perturbation: Optional[PerturbationSpec] = None,
    kernel: Optional[str] = None,
) -> Trajectory:
    """Integrate until grad_tol, t_max or divergence; deterministic given the seed.

    x0 may be a bare position vector; second-order families then start at
    rest (x2 = 0).  kernel overrides the import-time selection ("pure" or
    "compiled"); "auto"/None picks the compiled loop whenever it is built and
    the objective is a built-in quadratic.
    """
    state = _as_initial_state(method, obj, x0)
    n_steps = config.n_steps
    kick1, kick2 = _make_kicks(perturbation, n_steps, obj.dim, method.second_order)
    if kernel is None or kernel == "auto":
        kernel = _kernel.default_kernel()
        if kernel == "compiled" and not _kernel.supports_compiled(obj):
            kernel = "pure"
    indices, rows1, rows2, terminated, steps = _kernel.run_loop(
        method, obj, state, config.scheme, config.h, n_steps,
        config.grad_tol, int(config.record_every), kick1, kick2, kernel,
    )
    times = np.asarray(indices, dtype=float) * config.h
    x1s = np.asarray(rows1)
    x2s = None if rows2 is None else np.asarray(rows2)
    return _build_trajectory(method, obj, times, x1s, x2s, terminated, steps)


def _row_norms(a: np.ndarray) -> np.ndarray:
    return np.sqrt(np.sum(a * a, axis=1))


def _build_trajectory(method, obj, times, x1s, x2s, terminated, steps) -> Trajectory:
    m = x1s.shape[0]
    if hasattr(obj, "gradient_rows"):
        grads = obj.gradient_rows(x1s)
        f_vals = obj.value_rows(x1s)
    else:
        grads = np.array([obj.gradient(x) for x in x1s])
        f_vals = np.array([obj.value(x) for x in x1s])
    grad_norms = _row_norms(grads)
    nan = np.full(m, np.nan)
    psi_norms = storage_vals = lyap_basic = lyap_exp = nan
    if x2s is not None:
        lyap_basic = (f_vals - obj.fstar) + 0.5 * np.sum(x2s * x2s, axis=1)
        beta = method.eff_beta
        if beta is not None:
            psi = x2s + beta * grads
            psi_norms = _row_norms(psi)
            storage_vals = 0.5 * np.sum(psi * psi, axis=1)
        alpha = method.eff_alpha
        if alpha is not None:
            w = x2s + alpha * (x1s - obj.minimizer)
            lyap_exp = lyap_basic + 0.5 * np.sum(w * w, axis=1)
    return Trajectory(
        times=times, x1=x1s, x2=x2s,
        f_vals=f_vals, grad_norms=grad_norms, psi_norms=psi_norms,
        storage_vals=storage_vals, lyap_basic=lyap_basic, lyap_exp=lyap_exp,
        method=method, terminated_by=terminated, steps_taken=steps,
        xstar=obj.minimizer.copy(), fstar=obj.fstar,
    )


def _system_matrix(method: MethodSpec, obj) -> np.ndarray:
    if getattr(obj, "diag", None) is None and getattr(obj, "dense", None) is None:
        raise UnsupportedOracleError("closed form requires a built-in quadratic objective")
    a = np.diag(obj.diag) if obj.dense is None else np.asarray(obj.dense)
    n = obj.dim
    if method.family == GD_FLOW:
        return -a
    eye = np.eye(n)
    if method.family == HEAVY_BALL:
        cv, ch, cg = 0.0, 0.0, 1.0
    elif method.family == HBF:
        cv, ch, cg = float(method.lam), 0.0, 1.0
    elif method.family == PNI:
        al, be = float(method.alpha), float(method.beta)
        cv, ch, cg = al, be, al * be
    elif method.family in (PROPOSED, NAG_SC):
        al, be = method.eff_alpha, method.eff_beta
        cv, ch, cg = 2.0 * al, be, 1.0 + al * be
    else:
        cv, ch, cg = tm_coefficients(method)
    top = np.hstack([np.zeros((n, n)), eye])
    bot = np.hstack([-cg * a, -(cv * eye + ch * a)])
    return np.vstack([top, bot])


def _oracle_vector(method, obj, x0) -> np.ndarray:
    x0 = _as_initial_state(method, obj, x0)
    z = x0.x1 - obj.minimizer
    return z if x0.x2 is None else np.concatenate([z, x0.x2])


def _oracle_state(method, obj, y: np.ndarray) -> PhaseState:
    n = obj.dim
    if method.family == GD_FLOW:
        return PhaseState(y + obj.minimizer, None)
    return PhaseState(y[:n] + obj.minimizer, y[n:].copy())


def closed_form_quadratic(method: MethodSpec, obj, x0, t: float) -> PhaseState:
    """Exact state at time t for a built-in quadratic objective."""
    if t < 0.0:
        raise ValueError("t must be >= 0")
    m = _system_matrix(method, obj)
    y = expm(m * t) @ _oracle_vector(method, obj, x0)
    return _oracle_state(method, obj, y)


def closed_form_trajectory(method: MethodSpec, obj, x0, times):
    """Exact states at the given times; (x1 rows, x2 rows or None).

    Uniform grids are advanced by repeated application of one exponential
    propagator, which keeps the cost linear in the number of samples.
    """
    times = np.asarray(times, dtype=float)
    m = _system_matrix(method, obj)
    y0 = _oracle_vector(method, obj, x0)
    ys = np.empty((times.shape[0], y0.shape[0]))
    diffs = np.diff(times)
    uniform = times.shape[0] > 2 and np.allclose(diffs, diffs[0], rtol=1e-12, atol=0.0)
    if uniform and abs(times[0]) < 1e-300:
        phi = expm(m * diffs[0])
        y = y0.copy()
        for i in range(times.shape[0]):
            ys[i] = y
            y = phi @ y
    else:
        for i, t in enumerate(times):
            ys[i] = expm(m * t) @ y0
    n = obj.dim
    if method.family == GD_FLOW:
        return ys + obj.minimizer, None
    return ys[:, :n] + obj.minimizer, ys[:, n:].copy()


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """One row per recorded step; floats rendered with 17 significant digits."""
    n = traj.x1.shape[1]
    cols = ["t"]
    cols += [f"x1_{i}" for i in range(n)]
    cols += [f"x2_{i}" for i in range(n)]
    cols += ["f", "grad_norm", "psi_norm", "S", "V_basic", "V_exp"]
    x2 = traj.x2 if traj.x2 is not None else np.full_like(traj.x1, np.nan)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(cols) + "\n")
        for i in range(len(traj)):
            row = [traj.times[i], *traj.x1[i], *x2[i], traj.f_vals[i], traj.grad_norms[i],
                   traj.psi_norms[i], traj.storage_vals[i], traj.lyap_basic[i], traj.lyap_exp[i]]
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")

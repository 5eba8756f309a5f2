"""Right-hand sides, control laws and energy functions for the dynamics families.

Families (continuous time, g = grad f, H = hessian of f):

    gd_flow           x1' = -g(x1)
    heavy_ball        x2' = -g(x1)                          (undamped baseline)
    hbf               x2' = -lam*x2 - g(x1)                 (friction lam)
    pni               x2' = -beta*H(x1)x2 - alpha*(x2 + beta*g(x1))
    proposed          x2' = pni term + transversal term
    nag_sc            proposed with alpha=sqrt(mu), beta=sqrt(s)
    triple_momentum   x2' = -2*sqrt(mu)*x2 - gamma*(1+sqrt(mu*s))*sqrt(s)*H(x1)x2
                            - (1+sqrt(mu*s))*g(x1)

with x1' = x2 for all second-order families.  The transversal term is
u2 = -alpha*x2 - g(x1); `proposed` is built as the exact elementwise sum
of the two control inputs, so the superposition identity holds bitwise.

The compiled integration kernel mirrors the exact arithmetic used here;
keep the expression shapes in sync with _loop_cy.pyx when editing.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .objective import Vector, _as_vector

GD_FLOW = "gd_flow"
HEAVY_BALL = "heavy_ball"
HBF = "hbf"
PNI = "pni"
PROPOSED = "proposed"
NAG_SC = "nag_sc"
TRIPLE_MOMENTUM = "triple_momentum"

FAMILIES = (GD_FLOW, HEAVY_BALL, HBF, PNI, PROPOSED, NAG_SC, TRIPLE_MOMENTUM)
SECOND_ORDER = FAMILIES[1:]


class ParameterWarning(UserWarning):
    """Raised when a parameter choice violates a soft guideline (e.g. s > 1/L)."""


def _positive(name: str, value) -> float:
    if value is None:
        raise ValueError(f"{name} is required for this family")
    value = float(value)
    if not value > 0.0:
        raise ValueError(f"{name} must be > 0, got {value}")
    return value


@dataclass(frozen=True)
class MethodSpec:
    """Tagged choice of dynamics family plus its parameters.

    Only the fields relevant to `family` are read; irrelevant fields are
    ignored.  For nag_sc the attractivity rate and manifold slope are always
    derived (sqrt(mu), sqrt(s)) and must not be set independently.
    """

    family: str
    alpha: Optional[float] = None
    beta: Optional[float] = None
    mu: Optional[float] = None
    s: Optional[float] = None
    lam: Optional[float] = None
    gamma: Optional[float] = None
    label: Optional[str] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.family in (PNI, PROPOSED):
            _positive("alpha", self.alpha)
            _positive("beta", self.beta)
        elif self.family == HBF:
            if self.lam is None or float(self.lam) < 0.0:
                raise ValueError("hbf requires lam >= 0")
        elif self.family in (NAG_SC, TRIPLE_MOMENTUM):
            _positive("mu", self.mu)
            _positive("s", self.s)
            if self.family == NAG_SC and (self.alpha is not None or self.beta is not None):
                raise ValueError("nag_sc derives alpha and beta from (mu, s); do not set them")
            if self.gamma is not None and not float(self.gamma) > 0.0:
                raise ValueError("gamma must be > 0")

    @property
    def second_order(self) -> bool:
        return self.family != GD_FLOW

    @property
    def eff_alpha(self) -> Optional[float]:
        """Manifold attractivity rate; sqrt(mu) for the NAG-SC parameterization."""
        if self.family in (PNI, PROPOSED):
            return float(self.alpha)
        if self.family in (NAG_SC, TRIPLE_MOMENTUM):
            return math.sqrt(float(self.mu))
        return None

    @property
    def eff_beta(self) -> Optional[float]:
        """Manifold slope; sqrt(s) for the NAG-SC parameterization."""
        if self.family in (PNI, PROPOSED):
            return float(self.beta)
        if self.family in (NAG_SC, TRIPLE_MOMENTUM):
            return math.sqrt(float(self.s))
        return None

    @property
    def eff_gamma(self) -> float:
        return 1.0 if self.gamma is None else float(self.gamma)

    def display_label(self) -> str:
        if self.label:
            return self.label
        bits = []
        if self.family in (PNI, PROPOSED):
            bits = [f"alpha={self.alpha:g}", f"beta={self.beta:g}"]
        elif self.family in (NAG_SC, TRIPLE_MOMENTUM):
            bits = [f"mu={self.mu:g}", f"s={self.s:g}"]
            if self.family == TRIPLE_MOMENTUM:
                bits.append(f"gamma={self.eff_gamma:g}")
        elif self.family == HBF:
            bits = [f"lam={float(self.lam):g}"]
        return f"{self.family}({', '.join(bits)})" if bits else self.family

    def with_params(self, alpha: float, beta: float) -> "MethodSpec":
        """Grid instantiation: set (alpha, beta), mapped to (mu, s)=(alpha^2, beta^2)
        for the families whose parameters are derived."""
        if self.family in (NAG_SC, TRIPLE_MOMENTUM):
            return replace(self, mu=alpha * alpha, s=beta * beta, label=None)
        if self.family in (PNI, PROPOSED):
            return replace(self, alpha=alpha, beta=beta, label=None)
        return self


@dataclass(frozen=True, eq=False)
class PhaseState:
    """Simulation state: position x1 and, for second-order families, velocity x2."""

    x1: Vector
    x2: Optional[Vector] = None

    def __post_init__(self):
        object.__setattr__(self, "x1", np.asarray(self.x1, dtype=float))
        if self.x2 is not None:
            x2 = np.asarray(self.x2, dtype=float)
            if x2.size == 0:
                x2 = None
            elif x2.shape != self.x1.shape:
                raise ValueError("x2 must be empty or match the shape of x1")
            object.__setattr__(self, "x2", x2)

    @property
    def dim(self) -> int:
        return self.x1.shape[0]


def standing_start(x1) -> PhaseState:
    """Ball-at-rest initial condition (x1, 0)."""
    x1 = np.asarray(x1, dtype=float)
    return PhaseState(x1, np.zeros_like(x1))


def on_manifold_start(obj, x1, beta: float) -> PhaseState:
    """Initial condition on the implicit manifold: x2 = -beta*grad f(x1).

    Constructed so that manifold_residual() of the result is exactly zero.
    """
    x1 = _as_vector(np.asarray(x1, dtype=float), obj.dim)
    return PhaseState(x1, -(beta * obj.gradient(x1)))


def _require_second_order(state: PhaseState) -> Vector:
    if state.x2 is None:
        raise ValueError("this operation requires a second-order state (x2 present)")
    return state.x2


def _check_finite(state: PhaseState):
    if not np.all(np.isfinite(state.x1)) or (
        state.x2 is not None and not np.all(np.isfinite(state.x2))
    ):
        raise FloatingPointError("non-finite state")


def control_pni(obj, state: PhaseState, alpha: float, beta: float) -> Vector:
    """Manifold-stabilizing control input.

    u1 = -beta*H(x1)x2 - alpha*(x2 + beta*grad f(x1)), where alpha is half the
    storage decay rate (the exponential condition dS/dt <= -2*alpha*S is
    achieved with equality by this law).
    """
    x2 = _require_second_order(state)
    g = obj.gradient(state.x1)
    hv = obj.hessian_vec(state.x1, x2)
    return -beta * hv - alpha * (x2 + beta * g)


def control_transversal(obj, state: PhaseState, alpha: float) -> Vector:
    """Contracting input transversal to the manifold: u2 = -alpha*x2 - grad f(x1).

    Vanishes at the equilibrium, so it never shifts the minimizer.
    """
    x2 = _require_second_order(state)
    g = obj.gradient(state.x1)
    return -alpha * x2 - g


def rhs(method: MethodSpec, obj, state: PhaseState) -> PhaseState:
    """Time derivative of the state under the given dynamics family."""
    _as_vector(state.x1, obj.dim, "state.x1")
    _check_finite(state)
    if method.family == GD_FLOW:
        return PhaseState(-obj.gradient(state.x1), None)
    x2 = _require_second_order(state)
    if method.family == HEAVY_BALL:
        d2 = -obj.gradient(state.x1)
    elif method.family == HBF:
        d2 = -float(method.lam) * x2 - obj.gradient(state.x1)
    elif method.family == PNI:
        d2 = control_pni(obj, state, method.alpha, method.beta)
    elif method.family in (PROPOSED, NAG_SC):
        a, b = method.eff_alpha, method.eff_beta
        d2 = control_pni(obj, state, a, b) + control_transversal(obj, state, a)
    else:  # triple_momentum
        cv, ch, cg = tm_coefficients(method)
        g = obj.gradient(state.x1)
        hv = obj.hessian_vec(state.x1, x2)
        d2 = -cv * x2 - ch * hv - cg * g
    return PhaseState(x2.copy(), d2)


def tm_coefficients(method: MethodSpec) -> tuple:
    """(velocity, Hessian-velocity, gradient) damping coefficients for triple momentum."""
    mu, s = float(method.mu), float(method.s)
    root = math.sqrt(mu * s)
    return 2.0 * math.sqrt(mu), method.eff_gamma * (1.0 + root) * math.sqrt(s), 1.0 + root


def manifold_residual(obj, state: PhaseState, beta: float) -> Vector:
    """psi(x1, x2) = x2 + beta*grad f(x1); zero exactly on the invariant manifold."""
    x2 = _require_second_order(state)
    return x2 + beta * obj.gradient(state.x1)


def storage(obj, state: PhaseState, beta: float) -> float:
    """S = 0.5*||psi||^2, the squared distance-to-manifold energy."""
    psi = manifold_residual(obj, state, beta)
    return 0.5 * float(np.sum(psi * psi))


def lyapunov_basic(obj, state: PhaseState, fstar: float) -> float:
    """V = f(x1) - fstar + 0.5*||x2||^2; nonincreasing along the transversal flow."""
    x2 = _require_second_order(state)
    return obj.value(state.x1) - fstar + 0.5 * float(np.sum(x2 * x2))


def lyapunov_exp(obj, state: PhaseState, xstar, fstar: float, alpha: float) -> float:
    """Exponential-stability certificate V = f - fstar + 0.5*x2^2 + 0.5*(x2 + alpha*(x1 - xstar))^2."""
    x2 = _require_second_order(state)
    w = x2 + alpha * (state.x1 - np.asarray(xstar, dtype=float))
    return lyapunov_basic(obj, state, fstar) + 0.5 * float(np.sum(w * w))


def select_params(mu: float, s: float, lipschitz: Optional[float] = None) -> tuple:
    """Optimal parameter map (alpha, beta) = (sqrt(mu), sqrt(s)).

    Warns (does not fail) when s exceeds the 1/L step-size guideline.
    """
    mu = _positive("mu", mu)
    s = _positive("s", s)
    if lipschitz is not None and s > 1.0 / float(lipschitz):
        warnings.warn(
            f"step size s={s:g} exceeds the 1/L guideline (1/L={1.0 / float(lipschitz):g})",
            ParameterWarning,
            stacklevel=2,
        )
    return math.sqrt(mu), math.sqrt(s)

"""Strongly convex quadratic objectives with exact derivatives.

Every built-in objective is a quadratic f(x) = 0.5 x^T A x (+ b^T x), which
keeps all of the dynamics families linear and therefore admits a closed-form
oracle (see :func:`manifold_descent.integrate.closed_form_quadratic`).

Objectives are immutable after construction and safe to share across
concurrent simulations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from numpy.typing import NDArray

Vector = NDArray[np.float64]

UNIT_QUADRATIC = "unit_quadratic"
SPD_QUADRATIC = "spd_quadratic"
SHIFTED_QUADRATIC = "shifted_quadratic"

KINDS = (UNIT_QUADRATIC, SPD_QUADRATIC, SHIFTED_QUADRATIC)


class ConvexityParams(NamedTuple):
    """Strong-convexity modulus mu and gradient Lipschitz constant L, 0 < mu <= L."""

    mu: float
    L: float


class DerivativeCheck(NamedTuple):
    """Worst-case finite-difference errors from :func:`check_derivatives`."""

    max_rel_err_grad: float
    max_rel_err_hvp: float


def _as_vector(x, dim: int, name: str = "x") -> Vector:
    x = np.asarray(x, dtype=float)
    if x.shape != (dim,):
        raise ValueError(f"{name} has shape {x.shape}, expected ({dim},)")
    return x


@dataclass(frozen=True, eq=False)
class Quadratic:
    """A strongly convex quadratic objective.

    Exposes value, exact gradient, Hessian-vector products and the (mu, L)
    convexity metadata.  `diag` holds the Hessian diagonal when the matrix is
    diagonal (the identity for the unit kind); `dense` holds the full matrix
    otherwise.  Exactly one of the two is set.
    """

    kind: str
    dim: int
    diag: Optional[Vector] = None
    dense: Optional[Vector] = None
    offset: Optional[Vector] = None
    mu: float = 1.0
    L: float = 1.0
    minimizer: Vector = field(default=None)  # type: ignore[assignment]
    fstar: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.dim < 1:
            raise ValueError("dim must be a positive integer")

    # -- spec operations ---------------------------------------------------

    def value(self, x) -> float:
        """f(x); 0.5 x^T A x, plus b^T x for the shifted kind."""
        x = _as_vector(x, self.dim)
        if self.dense is not None:
            v = 0.5 * float(x @ (self.dense @ x))
        else:
            v = 0.5 * float(np.sum(self.diag * x * x))
        if self.offset is not None:
            v += float(np.sum(self.offset * x))
        return v

    def gradient(self, x) -> Vector:
        """Exact analytic gradient A x (+ b)."""
        x = _as_vector(x, self.dim)
        if self.dense is not None:
            g = self.dense @ x
        else:
            g = self.diag * x
        if self.offset is not None:
            g = g + self.offset
        return g

    def hessian_vec(self, x, v) -> Vector:
        """Hessian-vector product A v; independent of x for quadratics.

        The Hessian only ever enters the dynamics through products with the
        velocity, so no matrix is materialized on the caller's side.
        """
        x = _as_vector(x, self.dim)
        v = _as_vector(v, self.dim, "v")
        if self.dense is not None:
            return self.dense @ v
        return self.diag * v

    def convexity_params(self) -> ConvexityParams:
        """Exact (mu, L) = (lambda_min(A), lambda_max(A)), computed at construction."""
        return ConvexityParams(self.mu, self.L)

    # -- vectorized row evaluation (used by trajectory post-processing) -----

    def value_rows(self, xs: Vector) -> Vector:
        """f per row of an (m, dim) array."""
        xs = np.asarray(xs, dtype=float)
        if self.dense is not None:
            v = 0.5 * np.sum(xs * (xs @ self.dense), axis=1)
        else:
            v = 0.5 * np.sum(self.diag * xs * xs, axis=1)
        if self.offset is not None:
            v = v + xs @ self.offset
        return v

    def gradient_rows(self, xs: Vector) -> Vector:
        """Gradient per row of an (m, dim) array."""
        xs = np.asarray(xs, dtype=float)
        g = xs @ self.dense if self.dense is not None else self.diag * xs
        if self.offset is not None:
            g = g + self.offset
        return g

    # -- misc ---------------------------------------------------------------

    @property
    def is_diagonal(self) -> bool:
        return self.dense is None

    def describe(self) -> str:
        return f"{self.kind}(dim={self.dim}, mu={self.mu:g}, L={self.L:g})"


def _spd_eigs(a: Vector) -> ConvexityParams:
    if not np.array_equal(a, a.T):
        raise ValueError("matrix must be exactly symmetric as stored")
    eigs = np.linalg.eigvalsh(a)
    lo, hi = float(eigs[0]), float(eigs[-1])
    if lo <= 0.0:
        raise ValueError(f"matrix is not positive definite (min eigenvalue {lo:g})")
    return ConvexityParams(lo, hi)


def unit_quadratic(dim: int = 1) -> Quadratic:
    """f(x) = 0.5 ||x||^2 on R^dim; the identity Hessian gives (mu, L) = (1, 1)."""
    if dim < 1:
        raise ValueError("dim must be a positive integer")
    return Quadratic(
        kind=UNIT_QUADRATIC,
        dim=dim,
        diag=np.ones(dim),
        mu=1.0,
        L=1.0,
        minimizer=np.zeros(dim),
        fstar=0.0,
    )


def spd_quadratic(a) -> Quadratic:
    """f(x) = 0.5 x^T A x for a symmetric positive-definite A.

    Diagonal matrices are detected and stored as their diagonal, which lets
    the compiled kernel use the elementwise fast path.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    dim = a.shape[0]
    mu, lip = _spd_eigs(a)
    diagonal = np.count_nonzero(a - np.diag(np.diagonal(a))) == 0
    return Quadratic(
        kind=SPD_QUADRATIC,
        dim=dim,
        diag=np.diagonal(a).copy() if diagonal else None,
        dense=None if diagonal else a.copy(),
        mu=mu,
        L=lip,
        minimizer=np.zeros(dim),
        fstar=0.0,
    )


def shifted_quadratic(a, b) -> Quadratic:
    """f(x) = 0.5 x^T A x + b^T x; minimizer -A^{-1} b, computed at construction."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("matrix must be square")
    dim = a.shape[0]
    b = _as_vector(b, dim, "offset")
    mu, lip = _spd_eigs(a)
    xstar = np.linalg.solve(a, -b)
    fstar = 0.5 * float(xstar @ (a @ xstar)) + float(b @ xstar)
    diagonal = np.count_nonzero(a - np.diag(np.diagonal(a))) == 0
    return Quadratic(
        kind=SHIFTED_QUADRATIC,
        dim=dim,
        diag=np.diagonal(a).copy() if diagonal else None,
        dense=None if diagonal else a.copy(),
        offset=b.copy(),
        mu=mu,
        L=lip,
        minimizer=xstar,
        fstar=fstar,
    )


def check_derivatives(obj, x, h: float = 1e-5) -> DerivativeCheck:
    """Central-difference consistency check of gradient and Hessian-vector product.

    Probes every coordinate direction.  Errors are normalized by
    max(1, |analytic|), so they degrade gracefully to absolute errors where
    the analytic quantity vanishes (e.g. the gradient at the minimizer).
    """
    if h <= 0.0:
        raise ValueError("h must be positive")
    x = _as_vector(x, obj.dim)
    if not np.all(np.isfinite(x)):
        raise FloatingPointError("x must be finite")
    g = obj.gradient(x)
    err_g = 0.0
    err_h = 0.0
    for i in range(obj.dim):
        e = np.zeros(obj.dim)
        e[i] = 1.0
        fp = obj.value(x + h * e)
        fm = obj.value(x - h * e)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError("objective returned a non-finite value")
        fd = (fp - fm) / (2.0 * h)
        err_g = max(err_g, abs(fd - g[i]) / max(1.0, abs(g[i])))
        gp = obj.gradient(x + h * e)
        gm = obj.gradient(x - h * e)
        if not (np.all(np.isfinite(gp)) and np.all(np.isfinite(gm))):
            raise FloatingPointError("gradient returned a non-finite value")
        fd_h = (gp - gm) / (2.0 * h)
        hv = obj.hessian_vec(x, e)
        err_h = max(err_h, float(np.max(np.abs(fd_h - hv) / np.maximum(1.0, np.abs(hv)))))
    return DerivativeCheck(err_g, err_h)

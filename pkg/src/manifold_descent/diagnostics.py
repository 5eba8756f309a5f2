"""Post-hoc verification of the certificates carried by a trajectory.

Checks the three analytic properties of the controlled dynamics (manifold
invariance, exponential storage decay, Lyapunov monotonicity) against the
recorded samples, and estimates empirical convergence rates and settling
times from the suboptimality gap.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from .dynamics import NAG_SC, PNI, PROPOSED
from .integrate import TERM_DIVERGENCE, Trajectory

# Guards against division blow-ups on on-manifold starts / converged tails.
EPS_FLOOR = 1e-300
GAP_FLOOR = 1e-280


@dataclass(frozen=True)
class DecayFit:
    """Least-squares exponential fit of the suboptimality gap."""

    rate: float
    t_lo: float
    t_hi: float
    n_points: int


@dataclass(frozen=True)
class DiagnosticsReport:
    max_psi_violation: float
    max_storage_rel_dev: float
    lyapunov_monotone: Optional[bool]
    worst_uptick: float
    fitted_rate: float
    settling_time: float
    settle_eps: float
    fit_window: Tuple[float, float]
    verdicts: List[Tuple[str, bool]]

    def passed(self) -> bool:
        return all(ok for _, ok in self.verdicts)

    def to_json_dict(self) -> dict:
        def clean(v):
            if isinstance(v, float) and not math.isfinite(v):
                return None
            return v

        return {
            "max_psi_violation": clean(self.max_psi_violation),
            "max_storage_rel_dev": clean(self.max_storage_rel_dev),
            "lyapunov_monotone": self.lyapunov_monotone,
            "worst_uptick": clean(self.worst_uptick),
            "fitted_rate": clean(self.fitted_rate),
            "settling_time": clean(self.settling_time),
            "settle_eps": self.settle_eps,
            "fit_window": [clean(self.fit_window[0]), clean(self.fit_window[1])],
            "verdicts": [{"name": n, "passed": ok} for n, ok in self.verdicts],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"


def _require_storage(traj: Trajectory):
    if traj.method.family not in (PNI, PROPOSED, NAG_SC):
        raise ValueError("storage decay is defined for the pni/proposed/nag_sc families")
    if np.any(np.isnan(traj.storage_vals)):
        raise ValueError("trajectory carries no storage channel")


def check_storage_decay(traj: Trajectory, alpha: Optional[float] = None) -> float:
    """Deviation of S(t) from the certificate S(0)*exp(-2*alpha*t).

    For pni the control law enforces equality, so the maximum absolute
    relative deviation is returned.  For proposed/nag_sc only the inequality
    S(t) <= S(0)*exp(-2*alpha*t) is guaranteed; the maximum relative excess
    above the bound is returned (0 when the inequality holds).  An
    on-manifold start (S(0) = 0) is a vacuous pass and returns 0.
    """
    _require_storage(traj)
    if alpha is None:
        alpha = traj.method.eff_alpha
    s0 = float(traj.storage_vals[0])
    if s0 == 0.0:
        return 0.0
    ref = s0 * np.exp(-2.0 * alpha * traj.times)
    dev = (traj.storage_vals - ref) / max(s0, EPS_FLOOR)
    if traj.method.family == PNI:
        return float(np.max(np.abs(dev)))
    return max(0.0, float(np.max(dev)))


def check_manifold_invariance(traj: Trajectory, start_tol: float = 1e-12) -> float:
    """max_t ||psi(t)|| for a trajectory started on the manifold.

    Raises when the trajectory has no manifold channel (first-order family or
    no manifold slope) or was not started with psi(0) = 0.
    """
    if traj.x2 is None:
        raise ValueError("manifold residual is undefined for first-order trajectories")
    if np.any(np.isnan(traj.psi_norms)):
        raise ValueError("trajectory family has no manifold slope; psi is undefined")
    if traj.psi_norms[0] > start_tol:
        raise ValueError(
            f"trajectory does not start on the manifold (||psi(0)|| = {traj.psi_norms[0]:g})"
        )
    return float(np.max(traj.psi_norms))


def check_lyapunov(traj: Trajectory, which: str = "basic", tol: float = 1e-9):
    """(monotone, worst_uptick) for the selected Lyapunov channel.

    Monotone means V(t_{k+1}) <= V(t_k) + tol for every recorded step; the
    worst uptick is the largest positive increment (0 when V never rises).
    """
    if which == "basic":
        vals = traj.lyap_basic
    elif which == "exp":
        vals = traj.lyap_exp
    else:
        raise ValueError("which must be 'basic' or 'exp'")
    if traj.x2 is None or np.any(np.isnan(vals)):
        raise ValueError(f"Lyapunov channel {which!r} is undefined for this trajectory")
    diffs = np.diff(vals)
    worst = float(np.max(diffs, initial=0.0))
    return bool(np.all(diffs <= tol)), max(worst, 0.0)


def _default_window(traj: Trajectory) -> Tuple[float, float]:
    # Middle 60% of the horizon: skips the initial transient and the
    # floating-point floor near the end.
    t0, t1 = float(traj.times[0]), float(traj.times[-1])
    return t0 + 0.2 * (t1 - t0), t0 + 0.8 * (t1 - t0)


def fit_decay(traj: Trajectory, window: Optional[Tuple[float, float]] = None) -> DecayFit:
    """Least-squares fit of log(f - fstar) over the window.

    Samples where the gap underflows are dropped, shrinking the window; the
    effective window actually used is reported in the result.
    """
    if window is None:
        window = _default_window(traj)
    t_lo, t_hi = float(window[0]), float(window[1])
    gap = traj.f_vals - traj.fstar
    mask = (traj.times >= t_lo) & (traj.times <= t_hi) & (gap > GAP_FLOOR) & np.isfinite(gap)
    if int(np.count_nonzero(mask)) < 2:
        raise ValueError("no positive suboptimality gap inside the fit window")
    ts = traj.times[mask]
    slope = np.polyfit(ts, np.log(gap[mask]), 1)[0]
    return DecayFit(max(0.0, -float(slope)), float(ts[0]), float(ts[-1]), int(ts.shape[0]))


def fit_decay_rate(traj: Trajectory, window: Optional[Tuple[float, float]] = None) -> float:
    """Decay rate rho >= 0 with f - fstar ~ C exp(-rho t) over the window."""
    return fit_decay(traj, window).rate


def settling_time(traj: Trajectory, eps: float) -> float:
    """First recorded t with f - fstar <= eps that stays within the band; inf if never."""
    if not eps > 0.0:
        raise ValueError("eps must be > 0")
    gap = traj.f_vals - traj.fstar
    outside = np.where(~(gap <= eps))[0]
    if outside.size == 0:
        return float(traj.times[0])
    last_bad = int(outside[-1])
    if last_bad == len(traj) - 1:
        return math.inf
    return float(traj.times[last_bad + 1])


def max_undershoot(traj: Trajectory) -> float:
    """Largest excursion below zero of any position coordinate: max_t(-x1)."""
    return max(0.0, float(np.max(-traj.x1)))


def build_report(
    traj: Trajectory,
    settle_eps: float = 1e-6,
    window: Optional[Tuple[float, float]] = None,
    psi_tol: float = 1e-6,
    storage_tol: float = 1e-5,
    lyap_tol: float = 1e-9,
) -> DiagnosticsReport:
    """Run every certificate check that applies to this trajectory."""
    verdicts: List[Tuple[str, bool]] = [("converged", traj.terminated_by != TERM_DIVERGENCE)]

    max_psi = math.nan
    if traj.x2 is not None and not np.any(np.isnan(traj.psi_norms)):
        max_psi = float(np.max(traj.psi_norms))
        if traj.psi_norms[0] <= 1e-12:
            verdicts.append(("manifold_invariance", max_psi <= psi_tol))

    storage_dev = math.nan
    if traj.method.family in (PNI, PROPOSED, NAG_SC) and not np.any(np.isnan(traj.storage_vals)):
        storage_dev = check_storage_decay(traj)
        verdicts.append(("storage_decay", storage_dev <= storage_tol))

    monotone: Optional[bool] = None
    worst = math.nan
    if traj.x2 is not None:
        which = "exp" if not np.any(np.isnan(traj.lyap_exp)) else "basic"
        try:
            monotone, worst = check_lyapunov(traj, which, tol=lyap_tol)
            verdicts.append((f"lyapunov_{which}_monotone", monotone))
        except ValueError:
            pass

    try:
        fit = fit_decay(traj, window)
        rate, eff_window = fit.rate, (fit.t_lo, fit.t_hi)
    except ValueError:
        rate, eff_window = math.nan, (math.nan, math.nan)

    return DiagnosticsReport(
        max_psi_violation=max_psi,
        max_storage_rel_dev=storage_dev,
        lyapunov_monotone=monotone,
        worst_uptick=worst,
        fitted_rate=rate,
        settling_time=settling_time(traj, settle_eps),
        settle_eps=settle_eps,
        fit_window=eff_window,
        verdicts=verdicts,
    )

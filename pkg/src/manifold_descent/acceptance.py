"""Executable acceptance checks over the built-in objectives.

Each check is self-contained, runs at desk scale, and returns a pass/fail
result with a one-line detail.  `manifold-descent check` runs all of them
and exits nonzero if any fail; the pytest suite asserts them one by one.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass
from typing import Callable, List

import numpy as np

from .bench import SweepSpec, persistence_experiment, sweep, write_records_csv
from .diagnostics import (
    check_lyapunov,
    check_manifold_invariance,
    check_storage_decay,
    fit_decay_rate,
    max_undershoot,
    settling_time,
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
    on_manifold_start,
    rhs,
    standing_start,
)
from .integrate import IntegratorConfig, PerturbationSpec, closed_form_trajectory, simulate
from .objective import spd_quadratic, unit_quadratic


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _objectives():
    return [unit_quadratic(1), spd_quadratic(np.diag([1.0, 4.0]))]


def _all_methods():
    return [
        MethodSpec(GD_FLOW),
        MethodSpec(HEAVY_BALL),
        MethodSpec(HBF, lam=2.0),
        MethodSpec(PNI, alpha=1.0, beta=0.9),
        MethodSpec(PROPOSED, alpha=1.0, beta=0.9),
        MethodSpec(NAG_SC, mu=1.0, s=0.81),
        MethodSpec(TRIPLE_MOMENTUM, mu=1.0, s=0.81),
    ]


def _x0_for(method: MethodSpec, obj):
    ones = np.ones(obj.dim)
    return PhaseState(ones) if not method.second_order else standing_start(ones)


class _FlatCurvature:
    """Objective wrapper with the Hessian term suppressed (zero curvature feedback)."""

    def __init__(self, inner):
        self._inner = inner
        self.dim = inner.dim
        self.minimizer = inner.minimizer
        self.fstar = inner.fstar

    def value(self, x):
        return self._inner.value(x)

    def gradient(self, x):
        return self._inner.gradient(x)

    def hessian_vec(self, x, v):
        return np.zeros(self.dim)


def _two_mode_solution(alpha: float, beta: float, times: np.ndarray) -> np.ndarray:
    """Independent oracle for the scalar proposed ODE, x(0)=1, x'(0)=0.

    Characteristic roots from the quadratic formula on
    r^2 + (beta + 2 alpha) r + (1 + alpha beta) = 0, then the explicit
    two-mode solution.
    """
    p = beta + 2.0 * alpha
    q = 1.0 + alpha * beta
    disc = math.sqrt(p * p - 4.0 * q)
    r1, r2 = (-p + disc) / 2.0, (-p - disc) / 2.0
    c2 = r1 / (r1 - r2)
    c1 = 1.0 - c2
    return c1 * np.exp(r1 * times) + c2 * np.exp(r2 * times)


def check_oracle_equivalence() -> CheckResult:
    """Criterion 1: RK4 h=1e-3 matches the closed form within 1e-6 for every family."""
    cfg = IntegratorConfig(h=1e-3, t_max=10.0)
    worst = 0.0
    worst_at = ""
    for obj in _objectives():
        for method in _all_methods():
            traj = simulate(method, obj, _x0_for(method, obj), cfg)
            ex1, ex2 = closed_form_trajectory(method, obj, _x0_for(method, obj), traj.times)
            err = float(np.max(np.abs(traj.x1 - ex1)))
            if ex2 is not None:
                err = max(err, float(np.max(np.abs(traj.x2 - ex2))))
            if err > worst:
                worst, worst_at = err, f"{method.family}/{obj.kind}"

    # Characteristic roots for alpha=1, beta=0.9: r^2 + 2.9 r + 1.9 -> {-1, -1.9},
    # cross-checked against the simulated trajectory without going through expm.
    p, q = 2.9, 1.9
    disc = math.sqrt(p * p - 4.0 * q)
    roots = sorted([(-p + disc) / 2.0, (-p - disc) / 2.0])
    roots_ok = abs(roots[0] + 1.9) < 1e-12 and abs(roots[1] + 1.0) < 1e-12
    unit = unit_quadratic(1)
    traj = simulate(MethodSpec(PROPOSED, alpha=1.0, beta=0.9), unit, standing_start([1.0]), cfg)
    mode_err = float(np.max(np.abs(traj.x1[:, 0] - _two_mode_solution(1.0, 0.9, traj.times))))
    passed = worst <= 1e-6 and roots_ok and mode_err <= 1e-6
    return CheckResult(
        "oracle_equivalence",
        passed,
        f"max |sim - closed form| = {worst:.3e} ({worst_at}); "
        f"roots {{-1, -1.9}} ok={roots_ok}; two-mode err = {mode_err:.3e}",
    )


def check_storage_decay_equality() -> CheckResult:
    """Criterion 2: PnI storage follows S(0)exp(-2t) to better than 1e-5."""
    obj = unit_quadratic(1)
    method = MethodSpec(PNI, alpha=1.0, beta=0.9)
    traj = simulate(method, obj, standing_start([1.0]), IntegratorConfig(h=1e-3, t_max=10.0))
    dev = check_storage_decay(traj)
    return CheckResult("storage_decay", dev < 1e-5, f"max relative deviation = {dev:.3e}")


def check_manifold_invariance_pni() -> CheckResult:
    """Criterion 3: on-manifold starts stay within 1e-6 of the manifold under PnI."""
    obj = unit_quadratic(1)
    method = MethodSpec(PNI, alpha=1.0, beta=0.9)
    x0 = on_manifold_start(obj, [1.0], 0.9)
    traj = simulate(method, obj, x0, IntegratorConfig(h=1e-3, t_max=10.0))
    worst = check_manifold_invariance(traj)
    return CheckResult("manifold_invariance", worst <= 1e-6, f"max ||psi|| = {worst:.3e}")


def check_lyapunov_certificates() -> CheckResult:
    """Criterion 4: V_basic monotone for the transversal-only system; V_exp for proposed."""
    cfg = IntegratorConfig(h=1e-3, t_max=10.0)
    details = []
    ok = True
    for obj in _objectives():
        u2_only = MethodSpec(HBF, lam=1.0)  # x2' = -alpha*x2 - grad f with alpha = 1
        traj = simulate(u2_only, obj, standing_start(np.ones(obj.dim)), cfg)
        mono, uptick = check_lyapunov(traj, "basic")
        ok &= mono
        details.append(f"basic/{obj.kind}: uptick {uptick:.2e}")
    for obj, s in zip(_objectives(), (0.81, 0.25)):  # s <= 1/L for each objective
        method = MethodSpec(NAG_SC, mu=obj.mu, s=s)
        traj = simulate(method, obj, standing_start(np.ones(obj.dim)), cfg)
        mono, uptick = check_lyapunov(traj, "exp")
        ok &= mono
        details.append(f"exp/{obj.kind}: uptick {uptick:.2e}")
    return CheckResult("lyapunov_certificates", ok, "; ".join(details))


def check_family_identities() -> CheckResult:
    """Criterion 5: NAG-SC == proposed(sqrt(mu), sqrt(s)) exactly; HB variant matches."""
    rng = np.random.default_rng(20240817)
    nag = MethodSpec(NAG_SC, mu=1.0, s=0.81)
    pro = MethodSpec(PROPOSED, alpha=1.0, beta=0.9)
    exact = True
    hb_worst = 0.0
    for obj in (unit_quadratic(2), spd_quadratic(np.diag([1.0, 4.0]))):
        flat = _FlatCurvature(obj)
        for _ in range(50):
            state = PhaseState(rng.standard_normal(obj.dim), rng.standard_normal(obj.dim))
            da = rhs(nag, obj, state)
            db = rhs(pro, obj, state)
            exact &= np.array_equal(da.x1, db.x1) and np.array_equal(da.x2, db.x2)
            # Hessian suppressed: proposed collapses to x2' = -2a x2 - (1+ab) grad f.
            d_flat = rhs(pro, flat, state)
            expected = -2.0 * state.x2 - 1.9 * obj.gradient(state.x1)
            hb_worst = max(hb_worst, float(np.max(np.abs(d_flat.x2 - expected))))
    passed = exact and hb_worst < 1e-12
    return CheckResult(
        "family_identities",
        passed,
        f"nag_sc == proposed exactly: {exact}; HB-variant max dev = {hb_worst:.2e}",
    )


def check_figure_sweep() -> CheckResult:
    """Criterion 6: settling strictly decreasing in beta; undershoot no worse at alpha=10."""
    cfg = IntegratorConfig(h=1e-3, t_max=30.0)
    obj = unit_quadratic(1)
    betas = (0.3, 0.6, 0.9)
    ok = True
    details = []
    for family in (PNI, PROPOSED):
        undershoots = {}
        for alpha in (1.0, 10.0):
            settles = []
            for beta in betas:
                method = MethodSpec(family, alpha=alpha, beta=beta)
                traj = simulate(method, obj, standing_start([1.0]), cfg)
                settles.append(settling_time(traj, 1e-4))
                undershoots[(alpha, beta)] = max_undershoot(traj)
            decreasing = all(a > b for a, b in zip(settles, settles[1:]))
            ok &= decreasing and all(math.isfinite(t) for t in settles)
            details.append(
                f"{family} a={alpha:g}: " + ">".join(f"{t:.2f}" for t in settles)
            )
        for beta in betas:
            ok &= undershoots[(10.0, beta)] <= undershoots[(1.0, beta)] + 1e-12
    return CheckResult("figure_sweep", ok, "; ".join(details))


def check_rate_recovery() -> CheckResult:
    """Criterion 7: fitted decay rate of proposed(1, 0.9) is 2.0 within 5%."""
    obj = unit_quadratic(1)
    traj = simulate(
        MethodSpec(PROPOSED, alpha=1.0, beta=0.9), obj, standing_start([1.0]),
        IntegratorConfig(h=1e-3, t_max=10.0),
    )
    rate = fit_decay_rate(traj, (2.0, 8.0))
    return CheckResult("rate_recovery", abs(rate - 2.0) <= 0.1, f"fitted rate = {rate:.4f}")


def check_persistence() -> CheckResult:
    """Criterion 8: perturbed proposed stays at or below PnI; delta=0 rows are exact."""
    obj = unit_quadratic(1)
    cfg = IntegratorConfig(h=1e-3, t_max=10.0)
    methods = [MethodSpec(PNI, alpha=1.0, beta=0.9), MethodSpec(PROPOSED, alpha=1.0, beta=0.9)]
    rows, _ = persistence_experiment([0.0, 1e-3], list(range(20)), methods, obj, [1.0], cfg)
    med = {(r.delta, r.family): r.median_terminal_err for r in rows}
    ordered = med[(1e-3, PROPOSED)] <= med[(1e-3, PNI)]
    control_ok = True
    for method in methods:
        clean = simulate(method, obj, standing_start([1.0]), cfg)
        row = next(r for r in rows if r.delta == 0.0 and r.family == method.family)
        control_ok &= row.median_terminal_err == clean.terminal_error()
        control_ok &= row.max_terminal_err == clean.terminal_error()
    return CheckResult(
        "persistence",
        ordered and control_ok,
        f"median proposed {med[(1e-3, PROPOSED)]:.3e} <= pni {med[(1e-3, PNI)]:.3e}: {ordered}; "
        f"delta=0 control exact: {control_ok}",
    )


def _empirical_order(scheme: str, hs) -> float:
    obj = unit_quadratic(1)
    method = MethodSpec(PROPOSED, alpha=1.0, beta=0.9)
    errs = []
    for h in hs:
        cfg = IntegratorConfig(h=h, t_max=5.0, scheme=scheme)
        traj = simulate(method, obj, standing_start([1.0]), cfg)
        ex1, ex2 = closed_form_trajectory(method, obj, standing_start([1.0]), traj.times)
        errs.append(max(float(np.max(np.abs(traj.x1 - ex1))), float(np.max(np.abs(traj.x2 - ex2)))))
    slope = np.polyfit(np.log(np.asarray(hs)), np.log(np.asarray(errs)), 1)[0]
    return float(slope)


def check_integrator_order() -> CheckResult:
    """Criterion 9: empirical convergence orders 1 (euler) and 4 (rk4), each +-0.3."""
    o_euler = _empirical_order("euler", [0.02, 0.01, 0.005, 0.0025])
    o_rk4 = _empirical_order("rk4", [0.2, 0.1, 0.05, 0.025])
    passed = abs(o_euler - 1.0) <= 0.3 and abs(o_rk4 - 4.0) <= 0.3
    return CheckResult(
        "integrator_order", passed, f"euler order = {o_euler:.3f}, rk4 order = {o_rk4:.3f}"
    )


def check_sweep_determinism() -> CheckResult:
    """Criterion 10: repeated sweeps with fixed seeds emit byte-identical CSV."""
    spec = SweepSpec(
        alphas=[1.0, 10.0],
        betas=[0.3, 0.9],
        methods=[MethodSpec(PROPOSED, alpha=1.0, beta=0.9)],
        objective=unit_quadratic(1),
        x0=[1.0],
        config=IntegratorConfig(h=1e-3, t_max=5.0),
        perturbation=PerturbationSpec(delta=1e-3, seed=0),
        seeds=[0, 1],
    )
    blobs = []
    with tempfile.TemporaryDirectory() as tmp:
        for i in range(2):
            path = os.path.join(tmp, f"sweep{i}.csv")
            write_records_csv(sweep(spec), path)
            with open(path, "rb") as fh:
                blobs.append(fh.read())
    same = blobs[0] == blobs[1]
    return CheckResult("sweep_determinism", same, f"{len(blobs[0])} bytes, identical: {same}")


ALL_CHECKS: List[Callable[[], CheckResult]] = [
    check_oracle_equivalence,
    check_storage_decay_equality,
    check_manifold_invariance_pni,
    check_lyapunov_certificates,
    check_family_identities,
    check_figure_sweep,
    check_rate_recovery,
    check_persistence,
    check_integrator_order,
    check_sweep_determinism,
]


def run_all() -> List[CheckResult]:
    return [check() for check in ALL_CHECKS]

"""Certificate checks, rate fitting and settling times."""

import math

import numpy as np
import pytest

from manifold_descent import (
    IntegratorConfig,
    MethodSpec,
    PhaseState,
    build_report,
    check_lyapunov,
    check_manifold_invariance,
    check_storage_decay,
    fit_decay,
    fit_decay_rate,
    max_undershoot,
    on_manifold_start,
    settling_time,
    simulate,
    spd_quadratic,
    standing_start,
    unit_quadratic,
)
from manifold_descent.integrate import closed_form_trajectory, _build_trajectory

GD = MethodSpec("gd_flow")


class TestStorageDecay:
    def test_pni_equality(self, unit_obj, pni, canonical_cfg):
        traj = simulate(pni, unit_obj, standing_start([1.0]), canonical_cfg)
        assert check_storage_decay(traj) < 1e-5

    def test_rate_is_twice_alpha(self, unit_obj, canonical_cfg):
        # log S falls with slope -2*alpha exactly for pni.
        for alpha in (0.5, 1.0, 2.0):
            method = MethodSpec("pni", alpha=alpha, beta=0.9)
            traj = simulate(method, unit_obj, standing_start([1.0]), canonical_cfg)
            slope = np.polyfit(traj.times, np.log(traj.storage_vals), 1)[0]
            assert slope == pytest.approx(-2.0 * alpha, rel=1e-6)

    def test_on_manifold_start_vacuous(self, unit_obj, pni, canonical_cfg):
        traj = simulate(pni, unit_obj, on_manifold_start(unit_obj, [1.0], 0.9), canonical_cfg)
        assert check_storage_decay(traj) == 0.0

    def test_proposed_inequality_holds(self, unit_obj, proposed, canonical_cfg):
        traj = simulate(proposed, unit_obj, standing_start([1.0]), canonical_cfg)
        assert check_storage_decay(traj) == 0.0

    def test_euler_deviation_shrinks_with_h(self, unit_obj, pni):
        devs = []
        for h in (0.3, 0.15, 0.075):
            cfg = IntegratorConfig(h=h, t_max=10.0, scheme="euler")
            traj = simulate(pni, unit_obj, standing_start([1.0]), cfg)
            devs.append(check_storage_decay(traj))
        assert devs[0] > devs[1] > devs[2]

    def test_wrong_family(self, unit_obj, canonical_cfg):
        traj = simulate(MethodSpec("hbf", lam=1.0), unit_obj, standing_start([1.0]), canonical_cfg)
        with pytest.raises(ValueError):
            check_storage_decay(traj)


class TestManifoldInvariance:
    def test_pni_stays_on_manifold(self, unit_obj, pni, canonical_cfg):
        traj = simulate(pni, unit_obj, on_manifold_start(unit_obj, [1.0], 0.9), canonical_cfg)
        assert check_manifold_invariance(traj) < 1e-6

    def test_pni_diag_objective(self, diag_obj, canonical_cfg):
        method = MethodSpec("pni", alpha=1.0, beta=0.5)
        traj = simulate(method, diag_obj, on_manifold_start(diag_obj, [1.0, -1.0], 0.5), canonical_cfg)
        assert check_manifold_invariance(traj) < 1e-6

    def test_proposed_leaves_manifold(self, unit_obj, proposed, canonical_cfg):
        # Contrast case: the transversal bracket does not vanish on psi = 0,
        # so invariance is not expected.  Closed form for x0 = (1, -0.9):
        # max|psi| = (1/9) max|e^{-1.9t} - e^{-t}| ~= 0.0257941 at t = ln(1.9)/0.9.
        traj = simulate(proposed, unit_obj, on_manifold_start(unit_obj, [1.0], 0.9), canonical_cfg)
        worst = check_manifold_invariance(traj)
        assert worst == pytest.approx(0.025794087896, abs=1e-6)
        assert 1e-6 < worst < 0.05

    def test_first_order_rejected(self, unit_obj, canonical_cfg):
        traj = simulate(GD, unit_obj, PhaseState([1.0]), canonical_cfg)
        with pytest.raises(ValueError):
            check_manifold_invariance(traj)

    def test_off_manifold_start_rejected(self, unit_obj, pni, canonical_cfg):
        traj = simulate(pni, unit_obj, standing_start([1.0]), canonical_cfg)
        with pytest.raises(ValueError, match="start"):
            check_manifold_invariance(traj)


class TestLyapunov:
    def test_transversal_only_system_monotone(self, unit_obj, canonical_cfg):
        # u2-only dynamics is hbf with lam = alpha; dV/dt = -alpha*x2^2 <= 0.
        traj = simulate(MethodSpec("hbf", lam=1.0), unit_obj, standing_start([1.0]), canonical_cfg)
        monotone, uptick = check_lyapunov(traj, "basic")
        assert monotone and uptick <= 1e-9

    def test_finite_difference_matches_dissipation(self, unit_obj):
        # Central difference of V along the flow reproduces -alpha*||x2||^2.
        cfg = IntegratorConfig(h=1e-4, t_max=2.0)
        traj = simulate(MethodSpec("hbf", lam=1.0), unit_obj, standing_start([1.0]), cfg)
        v = traj.lyap_basic
        for i in range(1000, 15000, 2500):
            vdot = (v[i + 1] - v[i - 1]) / (traj.times[i + 1] - traj.times[i - 1])
            expected = -float(np.sum(traj.x2[i] * traj.x2[i]))
            assert vdot == pytest.approx(expected, abs=1e-6)

    def test_proposed_exp_monotone(self, unit_obj, proposed, canonical_cfg):
        traj = simulate(proposed, unit_obj, standing_start([1.0]), canonical_cfg)
        monotone, _ = check_lyapunov(traj, "exp")
        assert monotone

    def test_heavy_ball_conserves_energy(self, unit_obj, canonical_cfg):
        traj = simulate(MethodSpec("heavy_ball"), unit_obj, standing_start([1.0]), canonical_cfg)
        monotone, uptick = check_lyapunov(traj, "basic")
        assert monotone
        assert uptick < 1e-12
        # conserved, not strictly decreasing: many steps leave V unchanged
        assert np.sum(np.diff(traj.lyap_basic) >= 0.0) > 0

    def test_exp_needs_attractivity_rate(self, unit_obj, canonical_cfg):
        traj = simulate(MethodSpec("hbf", lam=1.0), unit_obj, standing_start([1.0]), canonical_cfg)
        with pytest.raises(ValueError):
            check_lyapunov(traj, "exp")

    def test_first_order_rejected(self, unit_obj, canonical_cfg):
        traj = simulate(GD, unit_obj, PhaseState([1.0]), canonical_cfg)
        with pytest.raises(ValueError):
            check_lyapunov(traj, "basic")

    def test_unknown_channel(self, unit_obj, proposed, canonical_cfg):
        traj = simulate(proposed, unit_obj, standing_start([1.0]), canonical_cfg)
        with pytest.raises(ValueError):
            check_lyapunov(traj, "expo")


class TestFitDecayRate:
    def test_proposed_canonical_window(self, unit_obj, proposed, canonical_cfg):
        traj = simulate(proposed, unit_obj, standing_start([1.0]), canonical_cfg)
        rate = fit_decay_rate(traj, (2.0, 8.0))
        assert rate == pytest.approx(2.0, rel=0.05)
        assert rate == pytest.approx(1.9789, abs=0.01)

    def test_gd_flow_exact_rate(self, unit_obj, canonical_cfg):
        traj = simulate(GD, unit_obj, PhaseState([1.0]), canonical_cfg)
        assert fit_decay_rate(traj) == pytest.approx(2.0, rel=1e-6)

    def test_constant_at_minimizer_errors(self, unit_obj, canonical_cfg):
        traj = simulate(GD, unit_obj, PhaseState([0.0]), canonical_cfg)
        with pytest.raises(ValueError):
            fit_decay_rate(traj)

    def test_closed_form_data_within_one_percent(self, diag_obj):
        times = np.linspace(0.0, 8.0, 8001)
        x1s, x2s = closed_form_trajectory(GD, diag_obj, PhaseState([1.0, 1.0]), times)
        traj = _build_trajectory(GD, diag_obj, times, x1s, None, "t_max", 8000)
        # Slow eigenvalue 1 of diag(1,4): f - f* ~ e^{-2t} late in the horizon.
        rate = fit_decay_rate(traj, (3.0, 8.0))
        assert rate == pytest.approx(2.0, rel=0.01)

    def test_effective_window_shrinks_on_underflow(self, unit_obj):
        # Double eigenvalue -40: the gap ~ e^{-80t} crosses the underflow
        # floor near t = 8, so the requested window must shrink.
        cfg = IntegratorConfig(h=1e-3, t_max=10.0)
        method = MethodSpec("pni", alpha=40.0, beta=40.0)
        traj = simulate(method, unit_obj, standing_start([1.0]), cfg)
        fit = fit_decay(traj, (0.0, 10.0))
        assert fit.t_hi < 9.5
        assert fit.n_points >= 2

    def test_rate_never_negative(self, unit_obj):
        cfg = IntegratorConfig(h=3.0, t_max=200.0, scheme="euler")
        traj = simulate(GD, unit_obj, PhaseState([1.0]), cfg)  # diverges, f grows
        assert fit_decay_rate(traj, (0.0, 60.0)) == 0.0


class TestSettlingTime:
    def test_starts_inside_band(self, unit_obj, canonical_cfg):
        traj = simulate(GD, unit_obj, PhaseState([0.001]), canonical_cfg)
        assert settling_time(traj, 1e-3) == 0.0

    def test_gd_flow_crossing(self, unit_obj, canonical_cfg):
        traj = simulate(GD, unit_obj, PhaseState([1.0]), canonical_cfg)
        # f(t) = 0.5 e^{-2t} <= 0.5 e^{-4} exactly at t = 2
        assert settling_time(traj, 0.5 * math.exp(-4.0)) == pytest.approx(2.0, abs=0.01)

    def test_diverged_never_settles(self, unit_obj):
        cfg = IntegratorConfig(h=3.0, t_max=200.0, scheme="euler")
        traj = simulate(GD, unit_obj, PhaseState([1.0]), cfg)
        assert settling_time(traj, 1e-6) == math.inf

    def test_eps_positive(self, unit_obj, canonical_cfg):
        traj = simulate(GD, unit_obj, PhaseState([1.0]), canonical_cfg)
        with pytest.raises(ValueError):
            settling_time(traj, 0.0)


class TestSweepClaims:
    def test_settling_decreases_with_beta(self, unit_obj):
        cfg = IntegratorConfig(h=1e-3, t_max=30.0)
        settles = []
        for beta in (0.3, 0.6, 0.9):
            traj = simulate(MethodSpec("pni", alpha=1.0, beta=beta), unit_obj,
                            standing_start([1.0]), cfg)
            settles.append(settling_time(traj, 1e-4))
        assert settles[0] > settles[1] > settles[2]

    def test_undershoot_damped_by_alpha(self, unit_obj):
        cfg = IntegratorConfig(h=1e-3, t_max=10.0)
        for beta in (0.3, 0.9):
            lo = max_undershoot(simulate(MethodSpec("pni", alpha=1.0, beta=beta),
                                         unit_obj, standing_start([1.0]), cfg))
            hi = max_undershoot(simulate(MethodSpec("pni", alpha=10.0, beta=beta),
                                         unit_obj, standing_start([1.0]), cfg))
            assert hi <= lo + 1e-12


class TestReport:
    def test_report_fields_and_json(self, unit_obj, proposed, canonical_cfg):
        traj = simulate(proposed, unit_obj, standing_start([1.0]), canonical_cfg)
        report = build_report(traj)
        assert report.passed()
        names = [n for n, _ in report.verdicts]
        assert "converged" in names and "storage_decay" in names
        assert "lyapunov_exp_monotone" in names

        import json

        data = json.loads(report.to_json())
        assert set(data) == {
            "max_psi_violation", "max_storage_rel_dev", "lyapunov_monotone",
            "worst_uptick", "fitted_rate", "settling_time", "settle_eps",
            "fit_window", "verdicts",
        }
        assert data["lyapunov_monotone"] is True

    def test_report_on_divergence(self, unit_obj):
        cfg = IntegratorConfig(h=3.0, t_max=200.0, scheme="euler")
        traj = simulate(GD, unit_obj, PhaseState([1.0]), cfg)
        report = build_report(traj)
        assert not report.passed()
        assert ("converged", False) in report.verdicts
        import json

        data = json.loads(report.to_json())
        assert data["settling_time"] is None  # inf -> null

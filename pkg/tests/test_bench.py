"""compare/sweep/persistence orchestration and serialization."""

import json
import math

import numpy as np
import pytest

from manifold_descent import (
    IntegratorConfig,
    MethodSpec,
    PerturbationSpec,
    SweepSpec,
    compare,
    persistence_experiment,
    simulate,
    standing_start,
    sweep,
    unit_quadratic,
)
from manifold_descent.bench import (
    PERSISTENCE_COLUMNS,
    RECORD_COLUMNS,
    write_persistence_csv,
    write_records_csv,
    write_records_json,
)

THREE_METHODS = [
    MethodSpec("gd_flow"),
    MethodSpec("hbf", lam=2.0),
    MethodSpec("proposed", alpha=1.0, beta=0.9),
]


class TestCompare:
    def test_empty_methods(self, unit_obj, canonical_cfg):
        assert compare([], unit_obj, [1.0], canonical_cfg) == []

    def test_ordering_and_fields(self, unit_obj, canonical_cfg):
        records = compare(THREE_METHODS, unit_obj, [1.0], canonical_cfg)
        assert [r.label for r in records] == sorted(r.label for r in records)
        assert {r.family for r in records} == {"gd_flow", "hbf", "proposed"}
        assert all(r.terminated_by == "t_max" for r in records)

    def test_settling_order_from_closed_form(self, unit_obj, canonical_cfg):
        # Closed form at eps = 1e-6 on the unit quadratic: gradient flow
        # settles at t = 0.5*ln(0.5e6) ~= 6.561 while proposed carries the
        # amplitude factor 19/9 on its slow mode and settles at ~7.308.
        records = {r.family: r for r in compare(THREE_METHODS, unit_obj, [1.0], canonical_cfg)}
        t_gd = records["gd_flow"].settling_time
        t_pro = records["proposed"].settling_time
        assert t_gd == pytest.approx(6.561, abs=0.01)
        assert t_pro == pytest.approx(7.308, abs=0.01)
        assert t_gd < t_pro
        # Both share the asymptotic decay rate 2 of the slow mode.
        assert records["gd_flow"].fitted_rate == pytest.approx(2.0, rel=0.05)
        assert records["proposed"].fitted_rate == pytest.approx(2.0, rel=0.05)

    def test_nag_and_proposed_identical_up_to_label(self, unit_obj, canonical_cfg):
        records = compare(
            [MethodSpec("nag_sc", mu=1.0, s=0.81), MethodSpec("proposed", alpha=1.0, beta=0.9)],
            unit_obj, [1.0], canonical_cfg,
        )
        a, b = records
        assert a.label != b.label
        assert a.settling_time == b.settling_time
        assert a.fitted_rate == b.fitted_rate
        assert a.terminal_gap == b.terminal_gap
        assert a.verdicts == b.verdicts

    def test_divergence_recorded_not_fatal(self, unit_obj):
        cfg = IntegratorConfig(h=3.0, t_max=200.0, scheme="euler")
        records = compare([MethodSpec("gd_flow")], unit_obj, [1.0], cfg)
        assert records[0].terminated_by == "divergence"
        assert "converged:fail" in records[0].verdicts


class TestSweep:
    def small_spec(self, unit_obj, **kw):
        defaults = dict(
            alphas=[1.0, 10.0],
            betas=[0.3, 0.6, 0.9],
            methods=[MethodSpec("pni", alpha=1.0, beta=0.9)],
            objective=unit_obj,
            x0=[1.0],
            config=IntegratorConfig(h=1e-2, t_max=5.0),
        )
        defaults.update(kw)
        return SweepSpec(**defaults)

    def test_grid_completeness_and_order(self, unit_obj):
        spec = self.small_spec(unit_obj, seeds=[0, 1])
        records = sweep(spec)
        assert len(records) == 2 * 3 * 1 * 2
        # row-major: alphas outermost, seeds innermost
        assert [r.alpha for r in records[:6]] == [1.0] * 6
        assert [r.beta for r in records[:4]] == [0.3, 0.3, 0.6, 0.6]
        assert [r.seed for r in records[:2]] == [None, None]  # no perturbation spec

    def test_single_point_matches_compare(self, unit_obj):
        cfg = IntegratorConfig(h=1e-3, t_max=10.0)
        method = MethodSpec("pni", alpha=1.0, beta=0.9)
        [swept] = sweep(self.small_spec(unit_obj, alphas=[1.0], betas=[0.9], config=cfg))
        [compared] = compare([method], unit_obj, [1.0], cfg)
        assert swept.settling_time == compared.settling_time
        assert swept.terminal_gap == compared.terminal_gap

    def test_settling_decreasing_in_beta_per_alpha(self, unit_obj):
        cfg = IntegratorConfig(h=1e-3, t_max=30.0)
        records = sweep(self.small_spec(unit_obj, config=cfg, settle_eps=1e-4))
        by_alpha = {a: [r.settling_time for r in records if r.alpha == a] for a in (1.0, 10.0)}
        for settles in by_alpha.values():
            assert settles[0] > settles[1] > settles[2]

    def test_nag_template_gets_derived_params(self, unit_obj):
        spec = self.small_spec(unit_obj, methods=[MethodSpec("nag_sc", mu=1.0, s=0.81)],
                               alphas=[2.0], betas=[0.5])
        [record] = sweep(spec)
        assert record.mu == 4.0 and record.s == 0.25

    def test_perturbation_floor(self, unit_obj, proposed):
        cfg = IntegratorConfig(h=1e-3, t_max=10.0)
        seeds = list(range(20))
        clean = sweep(self.small_spec(unit_obj, methods=[proposed], alphas=[1.0], betas=[0.9],
                                      config=cfg, seeds=seeds))
        noisy = sweep(self.small_spec(unit_obj, methods=[proposed], alphas=[1.0], betas=[0.9],
                                      config=cfg, seeds=seeds,
                                      perturbation=PerturbationSpec(delta=1e-3)))
        gap_clean = np.median([r.terminal_gap for r in clean])
        gap_noisy = np.median([r.terminal_gap for r in noisy])
        assert gap_noisy > gap_clean > 0.0

    def test_validation(self, unit_obj):
        with pytest.raises(ValueError):
            self.small_spec(unit_obj, alphas=[])
        with pytest.raises(ValueError):
            self.small_spec(unit_obj, betas=[-1.0])


class TestPersistence:
    def test_summary_shape_and_control(self, unit_obj, pni, proposed):
        cfg = IntegratorConfig(h=1e-2, t_max=5.0)
        rows, records = persistence_experiment(
            [1e-3], [0], [pni, proposed], unit_obj, [1.0], cfg
        )
        # control row (delta=0) per method plus the requested delta
        assert [(r.delta, r.family) for r in rows] == [
            (0.0, "pni"), (0.0, "proposed"), (1e-3, "pni"), (1e-3, "proposed"),
        ]
        assert len(records) == 4
        for row in rows[:2]:
            method = pni if row.family == "pni" else proposed
            clean = simulate(method, unit_obj, standing_start([1.0]), cfg)
            assert row.median_terminal_err == clean.terminal_error()
            assert row.max_terminal_err == clean.terminal_error()

    def test_both_reach_minimum_unperturbed(self, unit_obj, pni, proposed):
        cfg = IntegratorConfig(h=1e-3, t_max=20.0)
        rows, _ = persistence_experiment([0.0], [0], [pni, proposed], unit_obj, [1.0], cfg)
        assert all(row.median_terminal_err < 1e-6 for row in rows)

    def test_validation(self, unit_obj, pni):
        cfg = IntegratorConfig(h=1e-2, t_max=1.0)
        with pytest.raises(ValueError):
            persistence_experiment([-1e-3], [0], [pni], unit_obj, [1.0], cfg)
        with pytest.raises(ValueError):
            persistence_experiment([1e-3], [], [pni], unit_obj, [1.0], cfg)


class TestSerialization:
    def records(self, unit_obj, cfg):
        return compare(THREE_METHODS, unit_obj, [1.0], cfg)

    def test_csv_header_and_determinism(self, unit_obj, tmp_path):
        cfg = IntegratorConfig(h=1e-2, t_max=5.0)
        records = self.records(unit_obj, cfg)
        p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
        write_records_csv(records, p1)
        write_records_csv(self.records(unit_obj, cfg), p2)
        assert p1.read_text().splitlines()[0] == ",".join(RECORD_COLUMNS)
        assert p1.read_bytes() == p2.read_bytes()

    def test_wall_ms_zero_by_default(self, unit_obj, tmp_path):
        cfg = IntegratorConfig(h=1e-2, t_max=5.0)
        records = self.records(unit_obj, cfg)
        assert all(r.wall_ms > 0.0 for r in records)  # measured in memory
        path = tmp_path / "records.csv"
        write_records_csv(records, path)
        for line in path.read_text().splitlines()[1:]:
            assert line.rsplit(",", 1)[1] == "0.0"
        write_records_csv(records, path, include_timing=True)
        timed = [float(line.rsplit(",", 1)[1]) for line in path.read_text().splitlines()[1:]]
        assert all(t > 0.0 for t in timed)

    def test_json_mirror(self, unit_obj, tmp_path):
        cfg = IntegratorConfig(h=1e-2, t_max=5.0)
        records = self.records(unit_obj, cfg)
        path = tmp_path / "records.json"
        write_records_json(records, path)
        data = json.loads(path.read_text())
        assert len(data) == len(records)
        assert set(data[0]) == set(RECORD_COLUMNS)
        assert data[0]["label"] == records[0].label

    def test_nonfinite_rendering(self, unit_obj, tmp_path):
        cfg = IntegratorConfig(h=3.0, t_max=200.0, scheme="euler")
        records = compare([MethodSpec("gd_flow")], unit_obj, [1.0], cfg)
        assert math.isinf(records[0].settling_time)
        path = tmp_path / "div.json"
        write_records_json(records, path)
        assert json.loads(path.read_text())[0]["settling_time"] == "inf"

    def test_persistence_csv(self, unit_obj, pni, tmp_path):
        cfg = IntegratorConfig(h=1e-2, t_max=2.0)
        rows, _ = persistence_experiment([1e-3], [0, 1], [pni], unit_obj, [1.0], cfg)
        path = tmp_path / "persistence.csv"
        write_persistence_csv(rows, path)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(PERSISTENCE_COLUMNS)
        assert len(lines) == len(rows) + 1


class TestWorkerEnv:
    def test_thread_cap_preserves_results(self, unit_obj, canonical_cfg, monkeypatch):
        base = compare(THREE_METHODS, unit_obj, [1.0], canonical_cfg)
        monkeypatch.setenv("MANIFOLD_DESCENT_THREADS", "2")
        threaded = compare(THREE_METHODS, unit_obj, [1.0], canonical_cfg)
        assert [r.label for r in base] == [r.label for r in threaded]
        assert [r.terminal_gap for r in base] == [r.terminal_gap for r in threaded]

    def test_rejects_negative(self, unit_obj, canonical_cfg, monkeypatch):
        monkeypatch.setenv("MANIFOLD_DESCENT_THREADS", "-1")
        with pytest.raises(ValueError):
            compare(THREE_METHODS, unit_obj, [1.0], canonical_cfg)

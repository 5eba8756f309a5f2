"""Command-line front end.

Subcommands: run, compare, sweep, persist, check.  Exit codes: 0 success,
1 config/usage error, 2 divergence during simulation, 3 failed acceptance
verdicts (check).
"""

from __future__ import annotations

import argparse
import os
import sys

from . import acceptance, bench
from ._kernel import default_kernel
from .config import ConfigError, LoadedConfig, load_config
from .diagnostics import build_report
from .integrate import TERM_DIVERGENCE, PerturbationSpec, simulate, write_trajectory_csv
from .svgplot import save_plot

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGENCE = 2
EXIT_VERDICT = 3


def _add_common(sub: argparse.ArgumentParser, config_required: bool = True):
    sub.add_argument("--config", required=config_required, help="path to the run config file")
    sub.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
        help="override a config value (repeatable)",
    )
    sub.add_argument("--out", help="output directory (overrides [output] dir)")
    sub.add_argument("--format", choices=("csv", "json", "both"), help="output format")
    sub.add_argument("--plot", action="store_true", help="also write an SVG trajectory plot")
    sub.add_argument("--log-y", action="store_true", help="log-scale y axis in plots")
    sub.add_argument("--seed", type=int, help="override the perturbation seed")
    sub.add_argument("--timing", action="store_true",
                     help="write measured wall times (breaks byte-determinism)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="manifold-descent",
        description="Simulate and cross-validate accelerated-gradient ODE families.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_common(sub.add_parser("run", help="simulate one method and write trajectory outputs"))
    _add_common(sub.add_parser("compare", help="run every configured method on one problem"))
    _add_common(sub.add_parser("sweep", help="evaluate an alpha/beta parameter grid"))
    _add_common(sub.add_parser("persist", help="perturbation-persistence experiment"))
    check = sub.add_parser("check", help="run the acceptance suite on the built-ins")
    check.add_argument("--verbose", action="store_true", help="print details for passing checks")
    return parser


def _load(args) -> LoadedConfig:
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"perturbation.seed={args.seed}")
    cfg = load_config(args.config, overrides)
    if args.out:
        cfg.out_dir = args.out
    if args.format:
        cfg.out_format = args.format
    if args.plot:
        cfg.plot = True
    if args.log_y:
        cfg.log_y = True
    if args.timing:
        cfg.timing = True
    os.makedirs(cfg.out_dir, exist_ok=True)
    return cfg


def _pert_or_none(cfg: LoadedConfig):
    if cfg.perturbation is not None and cfg.perturbation.delta > 0.0:
        return cfg.perturbation
    return None


def _cmd_run(args) -> int:
    cfg = _load(args)
    if len(cfg.methods) != 1:
        raise ConfigError(f"run needs exactly one [method] section, found {len(cfg.methods)}")
    method = cfg.methods[0]
    traj = simulate(method, cfg.objective, cfg.initial_state(method), cfg.integrator, _pert_or_none(cfg))
    if cfg.out_format in ("csv", "both"):
        write_trajectory_csv(traj, os.path.join(cfg.out_dir, "traj.csv"))
    if cfg.out_format in ("json", "both"):
        report = build_report(traj, settle_eps=cfg.settle_eps, window=cfg.fit_window)
        with open(os.path.join(cfg.out_dir, "report.json"), "w") as fh:
            fh.write(report.to_json())
    if cfg.plot:
        save_plot(
            os.path.join(cfg.out_dir, "fig.svg"),
            [(method.display_label(), traj.times, traj.f_vals)],
            title=f"{method.display_label()} on {cfg.objective.describe()}",
            log_y=cfg.log_y,
        )
    print(
        f"{method.display_label()}: terminated by {traj.terminated_by} after "
        f"{traj.steps_taken} steps, terminal f-f* = {traj.terminal_gap():.6g}"
    )
    return EXIT_DIVERGENCE if traj.terminated_by == TERM_DIVERGENCE else EXIT_OK


def _write_records(cfg: LoadedConfig, records) -> None:
    if cfg.out_format in ("csv", "both"):
        bench.write_records_csv(records, os.path.join(cfg.out_dir, "summary.csv"), cfg.timing)
    if cfg.out_format in ("json", "both"):
        bench.write_records_json(records, os.path.join(cfg.out_dir, "summary.json"), cfg.timing)


def _records_exit(records) -> int:
    diverged = any(r.terminated_by == TERM_DIVERGENCE for r in records)
    return EXIT_DIVERGENCE if diverged else EXIT_OK


def _cmd_compare(args) -> int:
    cfg = _load(args)
    if not cfg.methods:
        raise ConfigError("compare needs at least one [method] section")
    records = bench.compare(
        cfg.methods, cfg.objective, cfg.initial_state(cfg.anchor_method()), cfg.integrator,
        _pert_or_none(cfg), cfg.settle_eps,
    )
    _write_records(cfg, records)
    for r in records:
        print(f"{r.label}: settling={r.settling_time:.6g} rate={r.fitted_rate:.6g} gap={r.terminal_gap:.6g}")
    return _records_exit(records)


def _cmd_sweep(args) -> int:
    cfg = _load(args)
    if cfg.sweep_alphas is None:
        raise ConfigError("sweep needs a [sweep] section with alphas and betas")
    if not cfg.methods:
        raise ConfigError("sweep needs at least one [method] section")
    spec = bench.SweepSpec(
        alphas=cfg.sweep_alphas,
        betas=cfg.sweep_betas,
        methods=cfg.methods,
        objective=cfg.objective,
        x0=cfg.initial_state(cfg.anchor_method()),
        config=cfg.integrator,
        perturbation=_pert_or_none(cfg),
        seeds=cfg.sweep_seeds,
        settle_eps=cfg.settle_eps,
    )
    records = bench.sweep(spec)
    _write_records(cfg, records)
    print(f"sweep: {len(records)} records -> {cfg.out_dir}")
    return _records_exit(records)


def _cmd_persist(args) -> int:
    cfg = _load(args)
    if cfg.persist_deltas is None:
        raise ConfigError("persist needs a [persist] section with deltas and seeds")
    if not cfg.methods:
        raise ConfigError("persist needs at least one [method] section")
    for m in cfg.methods:
        if not m.second_order:
            raise ConfigError("persist methods must be second-order families")
    pert = cfg.perturbation or PerturbationSpec()
    rows, records = bench.persistence_experiment(
        cfg.persist_deltas, cfg.persist_seeds, cfg.methods, cfg.objective,
        cfg.initial_state(cfg.anchor_method()), cfg.integrator,
        distribution=pert.distribution, target=pert.target, settle_eps=cfg.settle_eps,
    )
    if cfg.out_format in ("csv", "both"):
        bench.write_persistence_csv(rows, os.path.join(cfg.out_dir, "persistence.csv"))
        bench.write_records_csv(records, os.path.join(cfg.out_dir, "records.csv"), cfg.timing)
    if cfg.out_format in ("json", "both"):
        bench.write_persistence_json(rows, os.path.join(cfg.out_dir, "persistence.json"))
        bench.write_records_json(records, os.path.join(cfg.out_dir, "records.json"), cfg.timing)
    for row in rows:
        print(
            f"delta={row.delta:g} {row.label}: median={row.median_terminal_err:.3e} "
            f"max={row.max_terminal_err:.3e} over {row.n_seeds} seeds"
        )
    return _records_exit(records)


def _cmd_check(args) -> int:
    print(f"kernel: {default_kernel()}")
    results = acceptance.run_all()
    failed = 0
    for res in results:
        tag = "PASS" if res.passed else "FAIL"
        if res.passed and not args.verbose:
            print(f"{tag} {res.name}")
        else:
            print(f"{tag} {res.name}: {res.detail}")
        failed += 0 if res.passed else 1
    print(f"{len(results) - failed}/{len(results)} acceptance checks passed")
    return EXIT_OK if failed == 0 else EXIT_VERDICT


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "run": _cmd_run,
        "compare": _cmd_compare,
        "sweep": _cmd_sweep,
        "persist": _cmd_persist,
        "check": _cmd_check,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

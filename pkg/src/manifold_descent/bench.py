"""Experiment suites: method comparisons, parameter sweeps, persistence runs.

Grid points are independent and may be evaluated by a small thread pool
(MANIFOLD_DESCENT_THREADS caps the worker count, 0 = auto); aggregation is a
deterministic reduce in grid order, so concurrency never changes output
bytes.  Measured wall times are kept on the records but rendered as 0 in
CSV/JSON unless timing output is explicitly requested, keeping repeated runs
byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import _kernel
from .diagnostics import build_report
from .dynamics import MethodSpec
from .integrate import IntegratorConfig, PerturbationSpec, Trajectory, simulate

RECORD_COLUMNS = (
    "label", "family", "alpha", "beta", "mu", "s", "lambda", "gamma",
    "delta", "seed", "settling_time", "fitted_rate", "terminal_gap",
    "verdicts", "wall_ms",
)


@dataclass(frozen=True)
class RunRecord:
    """One simulation outcome: method identity, parameters and diagnostics."""

    label: str
    family: str
    alpha: Optional[float]
    beta: Optional[float]
    mu: Optional[float]
    s: Optional[float]
    lam: Optional[float]
    gamma: Optional[float]
    delta: float
    seed: Optional[int]
    settling_time: float
    fitted_rate: float
    terminal_gap: float
    terminal_error: float
    verdicts: str
    wall_ms: float
    terminated_by: str

    def values(self, include_timing: bool = False) -> list:
        return [
            self.label, self.family, self.alpha, self.beta, self.mu, self.s,
            self.lam, self.gamma, self.delta, self.seed, self.settling_time,
            self.fitted_rate, self.terminal_gap, self.verdicts,
            self.wall_ms if include_timing else 0.0,
        ]


@dataclass(frozen=True)
class PersistenceRow:
    """Aggregate over seeds for one (delta, method) cell."""

    delta: float
    label: str
    family: str
    n_seeds: int
    median_terminal_err: float
    max_terminal_err: float


@dataclass(frozen=True)
class SweepSpec:
    """Cartesian parameter grid: alphas x betas x methods x seeds."""

    alphas: Sequence[float]
    betas: Sequence[float]
    methods: Sequence[MethodSpec]
    objective: object
    x0: object
    config: IntegratorConfig
    perturbation: Optional[PerturbationSpec] = None
    seeds: Sequence[int] = (0,)
    settle_eps: float = 1e-6

    def __post_init__(self):
        if not self.alphas or not self.betas or not self.methods or not self.seeds:
            raise ValueError("alphas, betas, methods and seeds must be nonempty")
        if any(a <= 0 for a in self.alphas) or any(b <= 0 for b in self.betas):
            raise ValueError("all alpha and beta values must be > 0")


def _worker_count(n_items: int) -> int:
    env = os.environ.get("MANIFOLD_DESCENT_THREADS")
    if env is not None:
        cap = int(env)
        if cap < 0:
            raise ValueError("MANIFOLD_DESCENT_THREADS must be >= 0")
        workers = os.cpu_count() or 1 if cap == 0 else cap
    else:
        # Threads only pay off when the compiled loop releases the GIL.
        workers = min(4, os.cpu_count() or 1) if _kernel.HAVE_COMPILED else 1
    return max(1, min(workers, n_items))


def _pool_map(fn, items: list) -> list:
    workers = _worker_count(len(items))
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _verdict_string(report) -> str:
    return "|".join(f"{name}:{'pass' if ok else 'fail'}" for name, ok in report.verdicts)


def run_one(
    method: MethodSpec,
    obj,
    x0,
    config: IntegratorConfig,
    perturbation: Optional[PerturbationSpec] = None,
    settle_eps: float = 1e-6,
) -> Tuple[RunRecord, Trajectory]:
    """Simulate one method and fold the diagnostics into a RunRecord."""
    t0 = time.perf_counter()
    traj = simulate(method, obj, x0, config, perturbation)
    wall_ms = (time.perf_counter() - t0) * 1e3
    report = build_report(traj, settle_eps=settle_eps)
    record = RunRecord(
        label=method.display_label(),
        family=method.family,
        alpha=method.alpha,
        beta=method.beta,
        mu=method.mu,
        s=method.s,
        lam=method.lam,
        gamma=method.gamma,
        delta=0.0 if perturbation is None else perturbation.delta,
        seed=None if perturbation is None else int(perturbation.seed),
        settling_time=report.settling_time,
        fitted_rate=report.fitted_rate,
        terminal_gap=traj.terminal_gap(),
        terminal_error=traj.terminal_error(),
        verdicts=_verdict_string(report),
        wall_ms=wall_ms,
        terminated_by=traj.terminated_by,
    )
    return record, traj


def compare(
    methods: Sequence[MethodSpec],
    obj,
    x0,
    config: IntegratorConfig,
    perturbation: Optional[PerturbationSpec] = None,
    settle_eps: float = 1e-6,
) -> List[RunRecord]:
    """One record per method, identical x0/config across methods, ordered by label.

    Divergence is recorded on the record's verdicts, never raised.
    """
    results = _pool_map(
        lambda m: run_one(m, obj, x0, config, perturbation, settle_eps)[0], list(methods)
    )
    return sorted(results, key=lambda r: r.label)


def sweep(spec: SweepSpec) -> List[RunRecord]:
    """Evaluate the full grid; records are returned in row-major grid order."""
    grid = [
        (a, b, m, seed)
        for a in spec.alphas
        for b in spec.betas
        for m in spec.methods
        for seed in spec.seeds
    ]

    def one(point):
        a, b, template, seed = point
        method = template.with_params(a, b)
        pert = None
        if spec.perturbation is not None:
            pert = replace(spec.perturbation, seed=int(seed))
        return run_one(method, spec.objective, spec.x0, spec.config, pert, spec.settle_eps)[0]

    return _pool_map(one, grid)


def persistence_experiment(
    deltas: Sequence[float],
    seeds: Sequence[int],
    methods: Sequence[MethodSpec],
    obj,
    x0,
    config: IntegratorConfig,
    distribution: str = "uniform_ball",
    target: str = "both",
    settle_eps: float = 1e-6,
) -> Tuple[List[PersistenceRow], List[RunRecord]]:
    """Median/max terminal ||x1 - xstar|| per (delta, method) over the seeds.

    A delta=0 control row is always included (its runs carry no injected
    noise, so they match unperturbed simulations exactly).
    """
    if any(d < 0 for d in deltas):
        raise ValueError("deltas must be >= 0")
    if not seeds:
        raise ValueError("seeds must be nonempty")
    ordered = [0.0] + [float(d) for d in deltas if d != 0.0]

    jobs = [
        (delta, method, int(seed))
        for delta in ordered
        for method in methods
        for seed in seeds
    ]

    def one(job):
        delta, method, seed = job
        pert = PerturbationSpec(delta=delta, distribution=distribution, seed=seed, target=target)
        return run_one(method, obj, x0, config, pert, settle_eps)[0]

    records = _pool_map(one, jobs)

    rows: List[PersistenceRow] = []
    n = len(seeds)
    i = 0
    for delta in ordered:
        for method in methods:
            errs = np.array([r.terminal_error for r in records[i : i + n]])
            rows.append(
                PersistenceRow(
                    delta=delta,
                    label=method.display_label(),
                    family=method.family,
                    n_seeds=n,
                    median_terminal_err=float(np.median(errs)),
                    max_terminal_err=float(np.max(errs)),
                )
            )
            i += n
    return rows, records


# -- serialization -----------------------------------------------------------


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return _cell(v)
    return v


def write_records_csv(records: Sequence[RunRecord], path, include_timing: bool = False) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RECORD_COLUMNS)
        for r in records:
            writer.writerow([_cell(v) for v in r.values(include_timing)])


def records_to_json(records: Sequence[RunRecord], include_timing: bool = False) -> str:
    rows = [
        {col: _jsonable(v) for col, v in zip(RECORD_COLUMNS, r.values(include_timing))}
        for r in records
    ]
    return json.dumps(rows, indent=2) + "\n"


def write_records_json(records: Sequence[RunRecord], path, include_timing: bool = False) -> None:
    with open(path, "w") as fh:
        fh.write(records_to_json(records, include_timing))


PERSISTENCE_COLUMNS = ("delta", "label", "family", "n_seeds", "median_terminal_err", "max_terminal_err")


def write_persistence_csv(rows: Sequence[PersistenceRow], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PERSISTENCE_COLUMNS)
        for row in rows:
            writer.writerow([
                _cell(row.delta), row.label, row.family, row.n_seeds,
                _cell(row.median_terminal_err), _cell(row.max_terminal_err),
            ])


def write_persistence_json(rows: Sequence[PersistenceRow], path) -> None:
    data = [
        {
            "delta": row.delta,
            "label": row.label,
            "family": row.family,
            "n_seeds": row.n_seeds,
            "median_terminal_err": _jsonable(row.median_terminal_err),
            "max_terminal_err": _jsonable(row.max_terminal_err),
        }
        for row in rows
    ]
    with open(path, "w") as fh:
        fh.write(json.dumps(data, indent=2) + "\n")

"""Sectioned key-value config files (INI syntax) with schema validation.

Sections: [objective], one or more [method]/[method.<label>], [initial],
[integrator], [perturbation], [sweep], [persist], [bench], [output].
Unknown sections or keys are rejected; value errors name the offending
section and key, and syntax errors carry the parser's line numbers.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .dynamics import FAMILIES, MethodSpec, PhaseState, on_manifold_start, standing_start
from .integrate import DISTRIBUTIONS, TARGETS, IntegratorConfig, PerturbationSpec, SCHEMES
from .objective import (
    SHIFTED_QUADRATIC,
    SPD_QUADRATIC,
    UNIT_QUADRATIC,
    Quadratic,
    shifted_quadratic,
    spd_quadratic,
    unit_quadratic,
)


class ConfigError(Exception):
    """Unparseable or schema-invalid configuration."""


_SCHEMA: Dict[str, Sequence[str]] = {
    "objective": ("kind", "dim", "matrix", "offset"),
    "method": ("family", "alpha", "beta", "mu", "s", "lambda", "gamma"),
    "initial": ("x1", "x2"),
    "integrator": ("scheme", "h", "t_max", "grad_tol", "record_every"),
    "perturbation": ("delta", "distribution", "seed", "target"),
    "sweep": ("alphas", "betas", "seeds"),
    "persist": ("deltas", "seeds"),
    "bench": ("settle_eps", "fit_window"),
    "output": ("dir", "format", "plot", "log_y", "timing"),
}


@dataclass
class LoadedConfig:
    objective: Quadratic
    methods: List[MethodSpec]
    x1: np.ndarray
    x2_mode: object  # "zero" | "manifold" | vector
    integrator: IntegratorConfig
    perturbation: Optional[PerturbationSpec]
    sweep_alphas: Optional[List[float]] = None
    sweep_betas: Optional[List[float]] = None
    sweep_seeds: List[int] = field(default_factory=lambda: [0])
    persist_deltas: Optional[List[float]] = None
    persist_seeds: Optional[List[int]] = None
    settle_eps: float = 1e-6
    fit_window: Optional[Tuple[float, float]] = None
    out_dir: str = "out"
    out_format: str = "both"
    plot: bool = False
    log_y: bool = False
    timing: bool = False

    def anchor_method(self) -> MethodSpec:
        """Method whose parameters define the shared initial state.

        Prefers a second-order family so 'zero'/'manifold' velocity modes
        apply even when gd_flow appears first in the method list.
        """
        if not self.methods:
            raise ConfigError("at least one [method] section is required")
        return next((m for m in self.methods if m.second_order), self.methods[0])

    def initial_state(self, method: MethodSpec) -> PhaseState:
        if not method.second_order:
            return PhaseState(self.x1.copy())
        if isinstance(self.x2_mode, str):
            if self.x2_mode == "zero":
                return standing_start(self.x1)
            beta = method.eff_beta
            if beta is None:
                raise ConfigError(
                    f"[initial] x2: 'manifold' needs a family with a manifold slope, not {method.family}"
                )
            return on_manifold_start(self.objective, self.x1, beta)
        return PhaseState(self.x1.copy(), np.asarray(self.x2_mode, dtype=float))


def _floats(section: str, key: str, raw: str) -> List[float]:
    vals = []
    for item in raw.replace("\n", ",").split(","):
        item = item.strip()
        if not item:
            continue
        try:
            vals.append(float(item))
        except ValueError:
            raise ConfigError(f"[{section}] {key}: {item!r} is not a number") from None
    if not vals:
        raise ConfigError(f"[{section}] {key}: expected at least one number")
    return vals


def _ints(section: str, key: str, raw: str) -> List[int]:
    vals: List[int] = []
    for item in raw.replace("\n", ",").split(","):
        item = item.strip()
        if not item:
            continue
        try:
            if ".." in item:
                lo, hi = item.split("..")
                vals.extend(range(int(lo), int(hi) + 1))
            else:
                vals.append(int(item))
        except ValueError:
            raise ConfigError(f"[{section}] {key}: {item!r} is not an integer or a..b range") from None
    if not vals:
        raise ConfigError(f"[{section}] {key}: expected at least one integer")
    return vals


def _float(section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: {raw!r} is not a number") from None


def _int(section: str, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: {raw!r} is not an integer") from None


def _bool(section: str, key: str, raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"[{section}] {key}: {raw!r} is not a boolean")


def _check_keys(parser: configparser.ConfigParser):
    for section in parser.sections():
        base = "method" if section == "method" or section.startswith("method.") else section
        if base not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        allowed = _SCHEMA[base]
        for key in parser[section]:
            if key not in allowed:
                raise ConfigError(f"[{section}] unknown key {key!r} (allowed: {', '.join(allowed)})")


def _build_objective(parser) -> Quadratic:
    if not parser.has_section("objective"):
        return unit_quadratic(1)
    sec = parser["objective"]
    kind = sec.get("kind", UNIT_QUADRATIC).strip()
    if kind == UNIT_QUADRATIC:
        dim = _int("objective", "dim", sec.get("dim", "1"))
        if dim < 1:
            raise ConfigError("[objective] dim must be a positive integer")
        return unit_quadratic(dim)
    if kind in (SPD_QUADRATIC, SHIFTED_QUADRATIC):
        if "matrix" not in sec:
            raise ConfigError(f"[objective] matrix is required for kind {kind}")
        entries = _floats("objective", "matrix", sec["matrix"])
        dim = _int("objective", "dim", sec.get("dim", str(int(round(len(entries) ** 0.5)))))
        if dim * dim != len(entries):
            raise ConfigError(
                f"[objective] matrix: got {len(entries)} entries, expected dim*dim = {dim * dim}"
            )
        a = np.asarray(entries).reshape(dim, dim)
        try:
            if kind == SPD_QUADRATIC:
                return spd_quadratic(a)
            if "offset" not in sec:
                raise ConfigError("[objective] offset is required for kind shifted_quadratic")
            return shifted_quadratic(a, _floats("objective", "offset", sec["offset"]))
        except ValueError as exc:
            raise ConfigError(f"[objective] {exc}") from None
    raise ConfigError(f"[objective] kind: unknown kind {kind!r}")


def _build_methods(parser) -> List[MethodSpec]:
    methods = []
    for section in parser.sections():
        if section != "method" and not section.startswith("method."):
            continue
        sec = parser[section]
        if "family" not in sec:
            raise ConfigError(f"[{section}] family is required")
        family = sec["family"].strip()
        if family not in FAMILIES:
            raise ConfigError(f"[{section}] family: {family!r} is not one of {', '.join(FAMILIES)}")
        label = section.partition(".")[2] or None
        kwargs = {}
        for key, attr in (("alpha", "alpha"), ("beta", "beta"), ("mu", "mu"),
                          ("s", "s"), ("lambda", "lam"), ("gamma", "gamma")):
            if key in sec:
                kwargs[attr] = _float(section, key, sec[key])
        try:
            methods.append(MethodSpec(family=family, label=label, **kwargs))
        except ValueError as exc:
            raise ConfigError(f"[{section}] {exc}") from None
    return methods


def load_config(path: str, overrides: Sequence[str] = ()) -> LoadedConfig:
    """Parse, apply `section.key=value` overrides, validate, and build everything."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh, source=path)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"config syntax error: {exc}") from None

    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        dotted, value = item.split("=", 1)
        section, key = dotted.split(".", 1)
        if section == "method" and "." in key:  # method.<label>.key
            label, key = key.rsplit(".", 1)
            section = f"method.{label}"
        if not parser.has_section(section):
            parser.add_section(section)
        parser[section][key] = value

    _check_keys(parser)

    obj = _build_objective(parser)
    methods = _build_methods(parser)

    isec = parser["integrator"] if parser.has_section("integrator") else {}
    try:
        integrator = IntegratorConfig(
            scheme=isec.get("scheme", "rk4").strip(),
            h=_float("integrator", "h", isec.get("h", "1e-3")),
            t_max=_float("integrator", "t_max", isec.get("t_max", "10")),
            grad_tol=_float("integrator", "grad_tol", isec.get("grad_tol", "0")),
            record_every=_int("integrator", "record_every", isec.get("record_every", "1")),
        )
    except ValueError as exc:
        raise ConfigError(f"[integrator] {exc}") from None

    perturbation = None
    if parser.has_section("perturbation"):
        psec = parser["perturbation"]
        try:
            perturbation = PerturbationSpec(
                delta=_float("perturbation", "delta", psec.get("delta", "0")),
                distribution=psec.get("distribution", "uniform_ball").strip(),
                seed=_int("perturbation", "seed", psec.get("seed", "0")),
                target=psec.get("target", "both").strip(),
            )
        except ValueError as exc:
            raise ConfigError(f"[perturbation] {exc}") from None

    x1 = np.ones(obj.dim)
    x2_mode: object = "zero"
    if parser.has_section("initial"):
        nsec = parser["initial"]
        if "x1" in nsec:
            x1 = np.asarray(_floats("initial", "x1", nsec["x1"]))
            if x1.shape != (obj.dim,):
                raise ConfigError(f"[initial] x1: expected {obj.dim} entries, got {x1.shape[0]}")
        if "x2" in nsec:
            raw = nsec["x2"].strip()
            if raw in ("zero", "manifold"):
                x2_mode = raw
            else:
                vec = np.asarray(_floats("initial", "x2", raw))
                if vec.shape != (obj.dim,):
                    raise ConfigError(f"[initial] x2: expected {obj.dim} entries, got {vec.shape[0]}")
                x2_mode = vec

    cfg = LoadedConfig(
        objective=obj, methods=methods, x1=x1, x2_mode=x2_mode,
        integrator=integrator, perturbation=perturbation,
    )

    if parser.has_section("sweep"):
        ssec = parser["sweep"]
        if "alphas" not in ssec or "betas" not in ssec:
            raise ConfigError("[sweep] alphas and betas are required")
        cfg.sweep_alphas = _floats("sweep", "alphas", ssec["alphas"])
        cfg.sweep_betas = _floats("sweep", "betas", ssec["betas"])
        if "seeds" in ssec:
            cfg.sweep_seeds = _ints("sweep", "seeds", ssec["seeds"])

    if parser.has_section("persist"):
        psec = parser["persist"]
        if "deltas" not in psec or "seeds" not in psec:
            raise ConfigError("[persist] deltas and seeds are required")
        cfg.persist_deltas = _floats("persist", "deltas", psec["deltas"])
        cfg.persist_seeds = _ints("persist", "seeds", psec["seeds"])
        if any(d < 0 for d in cfg.persist_deltas):
            raise ConfigError("[persist] deltas must be >= 0")

    if parser.has_section("bench"):
        bsec = parser["bench"]
        if "settle_eps" in bsec:
            cfg.settle_eps = _float("bench", "settle_eps", bsec["settle_eps"])
            if cfg.settle_eps <= 0:
                raise ConfigError("[bench] settle_eps must be > 0")
        if "fit_window" in bsec:
            window = _floats("bench", "fit_window", bsec["fit_window"])
            if len(window) != 2 or window[0] >= window[1]:
                raise ConfigError("[bench] fit_window must be two increasing numbers")
            cfg.fit_window = (window[0], window[1])

    if parser.has_section("output"):
        osec = parser["output"]
        cfg.out_dir = osec.get("dir", cfg.out_dir).strip()
        fmt = osec.get("format", cfg.out_format).strip()
        if fmt not in ("csv", "json", "both"):
            raise ConfigError(f"[output] format: {fmt!r} is not csv|json|both")
        cfg.out_format = fmt
        if "plot" in osec:
            cfg.plot = _bool("output", "plot", osec["plot"])
        if "log_y" in osec:
            cfg.log_y = _bool("output", "log_y", osec["log_y"])
        if "timing" in osec:
            cfg.timing = _bool("output", "timing", osec["timing"])

    return cfg

"""TOML experiment configuration (schema version 1).

A config fully determines an experiment once a seed is supplied.  Unknown
keys anywhere are rejected so that typos cannot silently fall back to
defaults.  Layout::

    schema_version = 1
    name = "..."
    seed = 123                      # optional; the CLI's --seed overrides it

    [model]                         # family = "ising" or "ergm"
    [model.coupling]                # ising only: generator + parameters
    [weights]                       # kind = ones | block | contrast | custom
    [schedule]                      # replications, burn, start
    [floor]                         # rule = inv_sqrt_n | constant
    [estimate]                      # fits = [...], alpha, experimental
    [[checks]]                      # one table per check
"""

from __future__ import annotations

import copy
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ConfigError

SCHEMA_VERSION = 1

GENERATORS = {
    "complete": {"n"},
    "regular": {"n", "d"},
    "erdos_renyi": {"n", "p", "p_log_scale"},
    "sbm": {"n", "a", "b"},
    "bipartite": {"n"},
    "block_graphon": {"n", "boundaries", "values"},
    "wigner": {"n", "atom_dist", "mu"},
}
FITS = {"beta", "b_field", "joint", "bipartite", "ergm_beta1"}
CHECK_KEYS = {
    "ks": {"column", "max"},
    "variance": {"column", "target", "rel_tol"},
    "coverage": {"param", "lo", "hi"},
    "mean_within_se": {"column", "target", "value", "n_se"},
    "covariance_frobenius": {"columns", "target", "rel_tol"},
    "mixture": {"column", "target", "eps_fraction", "frac_lo", "frac_hi", "max_unassigned"},
    "regime": {"target", "expect"},
}
CHECK_REQUIRED = {
    "ks": {"max"},
    "variance": {"column", "target", "rel_tol"},
    "coverage": {"param", "lo", "hi"},
    "mean_within_se": {"column", "n_se"},
    "covariance_frobenius": {"columns", "target", "rel_tol"},
    "mixture": {"target", "frac_lo", "frac_hi", "max_unassigned"},
    "regime": {"target", "expect"},
}
START_KINDS = {"iid", "all_plus", "all_minus", "mode_basin", "empty"}


@dataclass
class ModelSpec:
    family: str
    beta: float = 0.0
    b_field: float = 0.0
    measure: Any = "rademacher"
    template: str | None = None
    coupling: dict = field(default_factory=dict)
    n: int | None = None
    terms: list = field(default_factory=list)


@dataclass
class WeightSpec:
    kind: str = "ones"
    block: int = 0
    values: list | None = None


@dataclass
class Schedule:
    replications: int = 1
    burn: int = 100
    start: str = "iid"


@dataclass
class FloorSpec:
    rule: str = "inv_sqrt_n"
    value: float | None = None


@dataclass
class EstimateSpec:
    fits: list = field(default_factory=list)
    alpha: float = 0.05
    experimental: bool = False


@dataclass
class CheckSpec:
    name: str
    kind: str
    params: dict = field(default_factory=dict)


@dataclass
class ExperimentConfig:
    name: str
    model: ModelSpec
    weights: WeightSpec = field(default_factory=WeightSpec)
    schedule: Schedule = field(default_factory=Schedule)
    floor: FloorSpec = field(default_factory=FloorSpec)
    estimate: EstimateSpec = field(default_factory=EstimateSpec)
    checks: list = field(default_factory=list)
    seed: int | None = None
    description: str = ""
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        return asdict(self)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        out = copy.deepcopy(self)
        out.seed = seed
        return out

    def with_replications(self, reps: int) -> "ExperimentConfig":
        out = copy.deepcopy(self)
        out.schedule.replications = int(reps)
        return out


def _reject_unknown(table: dict, allowed: set, where: str):
    extra = sorted(set(table) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing key {key!r} in {where}")
    return table[key]


def _number(x, where: str) -> float:
    if isinstance(x, bool) or not isinstance(x, (int, float)):
        raise ConfigError(f"{where} must be a number, got {x!r}")
    return float(x)


def _int(x, where: str, minimum: int = 0) -> int:
    if isinstance(x, bool) or not isinstance(x, int) or x < minimum:
        raise ConfigError(f"{where} must be an integer >= {minimum}, got {x!r}")
    return x


def _parse_model(t: dict) -> ModelSpec:
    family = _require(t, "family", "[model]")
    if family == "ising":
        _reject_unknown(t, {"family", "beta", "b_field", "measure", "template", "coupling"}, "[model]")
        coupling = dict(_require(t, "coupling", "[model]"))
        gen = _require(coupling, "generator", "[model.coupling]")
        if gen not in GENERATORS:
            raise ConfigError(f"unknown coupling generator {gen!r}")
        _reject_unknown(coupling, GENERATORS[gen] | {"generator"}, "[model.coupling]")
        _int(_require(coupling, "n", "[model.coupling]"), "coupling n", 2)
        measure = t.get("measure", "rademacher")
        if isinstance(measure, dict):
            _reject_unknown(measure, {"atoms"}, "[model.measure]")
            _require(measure, "atoms", "[model.measure]")
        elif measure != "rademacher":
            raise ConfigError(f"measure must be 'rademacher' or a table with atoms, got {measure!r}")
        template = t.get("template")
        if template is not None and template not in ("edge", "two_star", "triangle"):
            raise ConfigError(f"unknown template {template!r}")
        return ModelSpec(
            "ising", _number(t.get("beta", 0.0), "beta"), _number(t.get("b_field", 0.0), "b_field"),
            measure, template, coupling,
        )
    if family == "ergm":
        _reject_unknown(t, {"family", "n", "terms"}, "[model]")
        n = _int(_require(t, "n", "[model]"), "n", 2)
        terms = _require(t, "terms", "[model]")
        if not terms or not all(isinstance(x, list) and len(x) == 2 for x in terms):
            raise ConfigError("terms must be a list of [name, beta] pairs")
        terms = [[str(a), _number(b, f"term {a}")] for a, b in terms]
        return ModelSpec("ergm", n=n, terms=terms)
    raise ConfigError(f"unknown model family {family!r}")


def _parse_checks(items) -> list:
    out = []
    names = set()
    for k, item in enumerate(items):
        item = dict(item)
        kind = _require(item, "kind", f"[[checks]] #{k}")
        if kind not in CHECK_KEYS:
            raise ConfigError(f"unknown check kind {kind!r}")
        name = item.pop("name", f"{kind}_{k}")
        item.pop("kind")
        _reject_unknown(item, CHECK_KEYS[kind], f"check {name!r}")
        for key in sorted(CHECK_REQUIRED[kind]):
            _require(item, key, f"check {name!r}")
        if kind == "mean_within_se" and ("target" in item) == ("value" in item):
            raise ConfigError(f"check {name!r} needs exactly one of target or value")
        if name in names:
            raise ConfigError(f"duplicate check name {name!r}")
        names.add(name)
        out.append(CheckSpec(name, kind, item))
    return out


def parse_config(data: dict) -> ExperimentConfig:
    data = dict(data)
    top = {"schema_version", "name", "description", "seed", "model", "weights", "schedule", "floor",
           "estimate", "checks"}
    _reject_unknown(data, top, "top level")
    version = _require(data, "schema_version", "top level")
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
    model = _parse_model(dict(_require(data, "model", "top level")))

    w = dict(data.get("weights", {}))
    _reject_unknown(w, {"kind", "block", "values"}, "[weights]")
    weights = WeightSpec(w.get("kind", "ones"), _int(w.get("block", 0), "weights.block"), w.get("values"))
    if weights.kind not in ("ones", "block", "contrast", "custom"):
        raise ConfigError(f"unknown weights kind {weights.kind!r}")
    if weights.kind == "custom" and not weights.values:
        raise ConfigError("custom weights need a values list")

    s = dict(data.get("schedule", {}))
    _reject_unknown(s, {"replications", "burn", "start"}, "[schedule]")
    schedule = Schedule(
        _int(s.get("replications", 1), "replications", 1), _int(s.get("burn", 100), "burn"),
        s.get("start", "iid" if model.family == "ising" else "empty"),
    )
    if schedule.start not in START_KINDS:
        raise ConfigError(f"unknown start {schedule.start!r}")

    f = dict(data.get("floor", {}))
    _reject_unknown(f, {"rule", "value"}, "[floor]")
    floor = FloorSpec(f.get("rule", "inv_sqrt_n"), f.get("value"))
    if floor.rule == "constant":
        if floor.value is None or _number(floor.value, "floor.value") <= 0:
            raise ConfigError("constant floor needs a positive value")
    elif floor.rule != "inv_sqrt_n":
        raise ConfigError(f"unknown floor rule {floor.rule!r}")

    e = dict(data.get("estimate", {}))
    _reject_unknown(e, {"fits", "alpha", "experimental"}, "[estimate]")
    fits = list(e.get("fits", []))
    bad = [x for x in fits if x not in FITS]
    if bad:
        raise ConfigError(f"unknown fit(s): {bad}")
    alpha = _number(e.get("alpha", 0.05), "alpha")
    if not 0 < alpha < 1:
        raise ConfigError("alpha must lie in (0, 1)")
    experimental = e.get("experimental", False)
    if not isinstance(experimental, bool):
        raise ConfigError("estimate.experimental must be a boolean")
    # two-parameter fits on tensor models lack a consistency guarantee
    if model.template not in (None, "edge") and {"joint", "bipartite"} & set(fits) and not experimental:
        raise ConfigError("joint fits on tensor models need estimate.experimental = true")

    seed = data.get("seed")
    if seed is not None:
        _int(seed, "seed")
    return ExperimentConfig(
        name=str(_require(data, "name", "top level")), model=model, weights=weights, schedule=schedule,
        floor=floor, estimate=EstimateSpec(fits, alpha, experimental), checks=_parse_checks(data.get("checks", [])),
        seed=seed, description=str(data.get("description", "")),
    )


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        data = tomllib.loads(p.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {p}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {p}: {exc}") from exc
    return parse_config(data)


def loads_config(text: str) -> ExperimentConfig:
    try:
        return parse_config(tomllib.loads(text))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from exc


def bundled_config_path(name: str) -> Path:
    """Path of a config shipped with the package, by file stem."""
    p = Path(__file__).with_name("configs") / f"{name}.toml"
    if not p.exists():
        raise ConfigError(f"no bundled config named {name!r}")
    return p


def bundled_config_names() -> list[str]:
    return sorted(p.stem for p in (Path(__file__).with_name("configs")).glob("*.toml"))

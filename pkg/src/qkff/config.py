"""Declarative experiment configuration: JSON in, validated dataclasses out.

Validation errors carry the offending key path (e.g. ``model.n``) so CLI
users get actionable diagnostics; JSON syntax errors keep their line/column.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

METHODS = ("qdavidson", "mrk", "mrqd", "trotter", "exact", "lindblad")
SUBSPACE_METHODS = ("qdavidson", "mrk", "mrqd")
OUTPUT_FORMATS = ("csv", "json")
LINDBLAD_PROPAGATORS = ("exact", "trotter", "chain")
COLLAPSE_KINDS = ("damping", "dephasing", "depolarizing", "X", "Y", "Z")

ORACLE_CAP_DEFAULT = 13


class ConfigError(ValueError):
    """Invalid configuration; ``path`` points at the offending key."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


_REQUIRED = object()


def _get(d: dict, key: str, path: str, default=_REQUIRED):
    if key in d:
        return d[key]
    if default is _REQUIRED:
        raise ConfigError(f"{path}.{key}" if path else key, "missing required key")
    return default


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    return value


def _string(value, path: str, choices=None) -> str:
    if not isinstance(value, str):
        raise ConfigError(path, f"expected a string, got {value!r}")
    if choices is not None and value not in choices:
        raise ConfigError(path, f"expected one of {list(choices)}, got {value!r}")
    return value


@dataclass(frozen=True)
class ModelConfig:
    n: int
    jx: float
    jy: float
    jz: float
    h: float


@dataclass(frozen=True)
class ScheduleConfig:
    t_final: float
    n_time_points: int


@dataclass(frozen=True)
class MethodParams:
    m: int = 10
    tau: float = 1.0
    eps: float = 1e-3
    dtau: float = 0.45
    svd_threshold: float = 1e-12
    max_dim: int = 64
    trotter_steps: int = 40
    chain_propagator: str = "exact"
    chain_steps: int = 1
    exact_tol: float = 1e-10
    fidelity_target: float | None = None
    max_references: int | None = None
    max_iterations: int | None = None


@dataclass(frozen=True)
class ObservableSpec:
    name: str
    terms: tuple[tuple[str, float, float], ...]


@dataclass(frozen=True)
class CollapseSpec:
    rate: float
    site: int | None = None
    kind: str | None = None
    terms: tuple[tuple[str, float, float], ...] | None = None


@dataclass(frozen=True)
class LindbladSettings:
    collapses: tuple[CollapseSpec, ...] = ()
    propagator: str = "exact"
    trotter_steps: int = 100
    chain_m: int = 5
    chain_tau: float = 0.1


@dataclass(frozen=True)
class OutputConfig:
    path: str = "out"
    format: str = "csv"
    name: str | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelConfig
    initial_state: str
    method: str
    params: MethodParams = MethodParams()
    schedule: ScheduleConfig = ScheduleConfig(10.0, 101)
    observables: tuple[ObservableSpec, ...] = ()
    output: OutputConfig = OutputConfig()
    seed: int = 0
    fidelity: str = "auto"  # "auto" | "on" | "off"
    oracle_cap: int = ORACLE_CAP_DEFAULT
    lindblad: LindbladSettings | None = None


def _parse_terms(raw, path: str, n: int) -> tuple[tuple[str, float, float], ...]:
    if not isinstance(raw, list) or not raw:
        raise ConfigError(path, "expected a non-empty list of (axes, re, im) triples")
    out = []
    for i, entry in enumerate(raw):
        p = f"{path}[{i}]"
        if not isinstance(entry, (list, tuple)) or len(entry) != 3:
            raise ConfigError(p, "expected an (axes, re, im) triple")
        axes = _string(entry[0], f"{p}[0]")
        if len(axes) != n or set(axes) - set("IXYZ"):
            raise ConfigError(p, f"axes {axes!r} invalid for {n} qubits")
        out.append((axes, _number(entry[1], f"{p}[1]"), _number(entry[2], f"{p}[2]")))
    return tuple(out)


def _parse_model(raw, path: str) -> ModelConfig:
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    n = _integer(_get(raw, "n", path), f"{path}.n")
    if n < 2:
        raise ConfigError(f"{path}.n", "needs at least 2 sites")
    return ModelConfig(
        n=n,
        jx=_number(_get(raw, "jx", path), f"{path}.jx"),
        jy=_number(_get(raw, "jy", path), f"{path}.jy"),
        jz=_number(_get(raw, "jz", path), f"{path}.jz"),
        h=_number(_get(raw, "h", path), f"{path}.h"),
    )


def _parse_params(raw, path: str) -> MethodParams:
    if raw is None:
        return MethodParams()
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    defaults = MethodParams()
    known = set(defaults.__dataclass_fields__)
    for key in raw:
        if key not in known:
            raise ConfigError(f"{path}.{key}", "unknown parameter")
    kw: dict[str, Any] = {}
    for key in ("m", "max_dim", "trotter_steps", "chain_steps"):
        if key in raw:
            v = _integer(raw[key], f"{path}.{key}")
            if v < 1:
                raise ConfigError(f"{path}.{key}", "must be at least 1")
            kw[key] = v
    for key in ("tau", "eps", "dtau", "svd_threshold", "exact_tol"):
        if key in raw:
            v = _number(raw[key], f"{path}.{key}")
            if v <= 0:
                raise ConfigError(f"{path}.{key}", "must be positive")
            kw[key] = v
    if "svd_threshold" in kw and kw["svd_threshold"] >= 1:
        raise ConfigError(f"{path}.svd_threshold", "must be below 1")
    if "chain_propagator" in raw:
        kw["chain_propagator"] = _string(
            raw["chain_propagator"], f"{path}.chain_propagator", ("exact", "trotter")
        )
    if "fidelity_target" in raw and raw["fidelity_target"] is not None:
        v = _number(raw["fidelity_target"], f"{path}.fidelity_target")
        if not (0 < v <= 1):
            raise ConfigError(f"{path}.fidelity_target", "must lie in (0, 1]")
        kw["fidelity_target"] = v
    for key in ("max_references", "max_iterations"):
        if key in raw and raw[key] is not None:
            v = _integer(raw[key], f"{path}.{key}")
            if v < 1:
                raise ConfigError(f"{path}.{key}", "must be at least 1")
            kw[key] = v
    return MethodParams(**kw)


def _parse_observables(raw, path: str, n: int) -> tuple[ObservableSpec, ...]:
    if raw is None:
        return ()
    if not isinstance(raw, list):
        raise ConfigError(path, "expected a list of observables")
    out = []
    for i, entry in enumerate(raw):
        p = f"{path}[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(p, "expected an object with 'terms'")
        terms = _parse_terms(_get(entry, "terms", p), f"{p}.terms", n)
        name = _string(entry.get("name", f"obs{i}"), f"{p}.name")
        out.append(ObservableSpec(name, terms))
    return tuple(out)


def _parse_lindblad(raw, path: str, n: int) -> LindbladSettings:
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    collapses = []
    raw_collapses = raw.get("collapses", [])
    if not isinstance(raw_collapses, list):
        raise ConfigError(f"{path}.collapses", "expected a list")
    for i, entry in enumerate(raw_collapses):
        p = f"{path}.collapses[{i}]"
        if not isinstance(entry, dict):
            raise ConfigError(p, "expected an object")
        rate = _number(_get(entry, "rate", p), f"{p}.rate")
        if rate < 0:
            raise ConfigError(f"{p}.rate", "must be nonnegative")
        if "terms" in entry:
            collapses.append(
                CollapseSpec(rate=rate, terms=_parse_terms(entry["terms"], f"{p}.terms", n))
            )
        else:
            site = _integer(_get(entry, "site", p), f"{p}.site")
            if not (1 <= site <= n):
                raise ConfigError(f"{p}.site", f"outside 1..{n}")
            kind = _string(_get(entry, "kind", p), f"{p}.kind", COLLAPSE_KINDS)
            collapses.append(CollapseSpec(rate=rate, site=site, kind=kind))
    propagator = _string(
        raw.get("propagator", "exact"), f"{path}.propagator", LINDBLAD_PROPAGATORS
    )
    trotter_steps = _integer(raw.get("trotter_steps", 100), f"{path}.trotter_steps")
    chain_m = _integer(raw.get("chain_m", 5), f"{path}.chain_m")
    chain_tau = _number(raw.get("chain_tau", 0.1), f"{path}.chain_tau")
    if trotter_steps < 1 or chain_m < 1 or chain_tau <= 0:
        raise ConfigError(path, "invalid lindblad propagator parameters")
    return LindbladSettings(tuple(collapses), propagator, trotter_steps, chain_m, chain_tau)


def config_from_dict(raw: dict, source: str = "<config>") -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError(source, "top-level config must be an object")
    model = _parse_model(_get(raw, "model", ""), "model")
    method = _string(_get(raw, "method", ""), "method", METHODS)
    initial = _string(raw.get("initial_state", "neel"), "initial_state")
    if initial != "neel":
        if len(initial) != model.n or set(initial) - {"0", "1"}:
            raise ConfigError(
                "initial_state", f"expected 'neel' or a {model.n}-bit string"
            )
    params = _parse_params(raw.get("params"), "params")
    sched_raw = raw.get("schedule", {})
    if not isinstance(sched_raw, dict):
        raise ConfigError("schedule", "expected an object")
    t_final = _number(sched_raw.get("t_final", 10.0), "schedule.t_final")
    n_points = _integer(sched_raw.get("n_time_points", 101), "schedule.n_time_points")
    if t_final <= 0:
        raise ConfigError("schedule.t_final", "must be positive")
    if n_points < 2:
        raise ConfigError("schedule.n_time_points", "needs at least 2 points")
    observables = _parse_observables(raw.get("observables"), "observables", model.n)
    out_raw = raw.get("output", {})
    if not isinstance(out_raw, dict):
        raise ConfigError("output", "expected an object")
    output = OutputConfig(
        path=_string(out_raw.get("path", "out"), "output.path"),
        format=_string(out_raw.get("format", "csv"), "output.format", OUTPUT_FORMATS),
        name=out_raw.get("name"),
    )
    seed = _integer(raw.get("seed", 0), "seed")
    fid_raw = raw.get("fidelity", "auto")
    if fid_raw is True:
        fid = "on"
    elif fid_raw is False:
        fid = "off"
    else:
        fid = _string(fid_raw, "fidelity", ("auto", "on", "off"))
    oracle_cap = _integer(raw.get("oracle_cap", ORACLE_CAP_DEFAULT), "oracle_cap")
    lind = None
    if method == "lindblad":
        lind = _parse_lindblad(raw.get("lindblad", {}), "lindblad", model.n)
    return ExperimentConfig(
        model=model,
        initial_state=initial,
        method=method,
        params=params,
        schedule=ScheduleConfig(t_final, n_points),
        observables=observables,
        output=output,
        seed=seed,
        fidelity=fid,
        oracle_cap=oracle_cap,
        lindblad=lind,
    )


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(
            str(path), f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    return config_from_dict(raw, source=str(path))


def _set_by_path(raw: dict, dotted: str, value) -> None:
    keys = dotted.split(".")
    cur = raw
    for k in keys[:-1]:
        nxt = cur.get(k)
        if not isinstance(nxt, dict):
            nxt = {}
            cur[k] = nxt
        cur = nxt
    cur[keys[-1]] = value


def apply_overrides(raw: dict, assignments: list[str]) -> dict:
    """Apply ``key.path=json_value`` overrides on a raw config dict."""
    out = json.loads(json.dumps(raw))  # deep copy
    for item in assignments:
        if "=" not in item:
            raise ConfigError(item, "override must look like key.path=value")
        dotted, _, text = item.partition("=")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text  # bare strings are taken literally
        _set_by_path(out, dotted.strip(), value)
    return out


def snapshot(cfg: ExperimentConfig) -> dict:
    """Fully resolved config dict; rerunning it reproduces the experiment."""
    out: dict[str, Any] = {
        "model": {
            "n": cfg.model.n,
            "jx": cfg.model.jx,
            "jy": cfg.model.jy,
            "jz": cfg.model.jz,
            "h": cfg.model.h,
        },
        "initial_state": cfg.initial_state,
        "method": cfg.method,
        "params": {
            "m": cfg.params.m,
            "tau": cfg.params.tau,
            "eps": cfg.params.eps,
            "dtau": cfg.params.dtau,
            "svd_threshold": cfg.params.svd_threshold,
            "max_dim": cfg.params.max_dim,
            "trotter_steps": cfg.params.trotter_steps,
            "chain_propagator": cfg.params.chain_propagator,
            "chain_steps": cfg.params.chain_steps,
            "exact_tol": cfg.params.exact_tol,
            "fidelity_target": cfg.params.fidelity_target,
            "max_references": cfg.params.max_references,
            "max_iterations": cfg.params.max_iterations,
        },
        "schedule": {
            "t_final": cfg.schedule.t_final,
            "n_time_points": cfg.schedule.n_time_points,
        },
        "observables": [
            {"name": o.name, "terms": [list(t) for t in o.terms]} for o in cfg.observables
        ],
        "output": {
            "path": cfg.output.path,
            "format": cfg.output.format,
            "name": cfg.output.name,
        },
        "seed": cfg.seed,
        "fidelity": cfg.fidelity,
        "oracle_cap": cfg.oracle_cap,
    }
    if cfg.lindblad is not None:
        out["lindblad"] = {
            "collapses": [
                {
                    "rate": c.rate,
                    **({"site": c.site, "kind": c.kind} if c.terms is None else {}),
                    **({"terms": [list(t) for t in c.terms]} if c.terms is not None else {}),
                }
                for c in cfg.lindblad.collapses
            ],
            "propagator": cfg.lindblad.propagator,
            "trotter_steps": cfg.lindblad.trotter_steps,
            "chain_m": cfg.lindblad.chain_m,
            "chain_tau": cfg.lindblad.chain_tau,
        }
    return out

"""Experiment execution: builds the model and subspace for a config, walks a
uniform time grid, and emits deterministic CSV/JSON records plus sweep tables.

Data outputs are byte-stable across reruns of the same config; wall-clock
timings go to a separate sidecar file so they never perturb the record.
"""
from __future__ import annotations

import concurrent.futures
import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import krylov, lindblad, pauli
from .config import (
    ConfigError,
    ExperimentConfig,
    LindbladSettings,
    snapshot,
)
from .krylov import ChainSpec, KrylovSubspace, QDavidsonParams, StopRule
from .lindblad import DensityVector, LindbladSpec
from .pauli import PauliSum, heisenberg_xyz
from .states import StateVector, basis_state, exact_evolve, neel_state, trotter_evolve

RECORD_FORMAT = "qkff-run-v1"
SWEEP_FORMAT = "qkff-sweep-v1"
COMPARE_FORMAT = "qkff-compare-v1"

SWEEP_METHOD_ORDER = ("qdavidson", "mrqd", "mrk")


@dataclass
class RunRecord:
    """One experiment's time series plus enough metadata to rerun it."""

    config: dict
    columns: list[str]
    rows: np.ndarray
    subspace: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    # built subspace, kept for checkpointing; never serialized
    subspace_obj: KrylovSubspace | None = field(default=None, repr=False, compare=False)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def build_model(cfg: ExperimentConfig) -> PauliSum:
    m = cfg.model
    return heisenberg_xyz(m.n, m.jx, m.jy, m.jz, m.h)


def initial_state(cfg: ExperimentConfig) -> StateVector:
    if cfg.initial_state == "neel":
        return neel_state(cfg.model.n)
    return basis_state(cfg.model.n, cfg.initial_state)


def _observable_ops(cfg: ExperimentConfig) -> list[tuple[str, PauliSum]]:
    return [
        (o.name, pauli.from_triples(cfg.model.n, o.terms)) for o in cfg.observables
    ]


def _want_fidelity(cfg: ExperimentConfig) -> bool:
    if cfg.fidelity == "off":
        return False
    within = cfg.model.n <= cfg.oracle_cap
    if cfg.fidelity == "on" and not within:
        raise ConfigError(
            "fidelity", f"oracle cap {cfg.oracle_cap} exceeded by n={cfg.model.n}"
        )
    return within


def _grid(cfg: ExperimentConfig) -> np.ndarray:
    return np.linspace(0.0, cfg.schedule.t_final, cfg.schedule.n_time_points)


def _exact_grid_states(
    h: PauliSum, s0: StateVector, grid: np.ndarray, tol: float
) -> list[StateVector]:
    out = []
    cur = s0
    prev = 0.0
    for t in grid:
        cur = exact_evolve(h, cur, float(t) - prev, tol)
        prev = float(t)
        out.append(cur)
    return out


def _state_expectation(o: PauliSum, s: StateVector) -> float:
    val = complex(np.vdot(s.amps, pauli.apply(o, s.amps)))
    if abs(val.imag) > 1e-8:
        raise ValueError(f"observable expectation has imaginary part {val.imag:.3e}")
    return float(val.real)


def _qd_params(cfg: ExperimentConfig) -> QDavidsonParams:
    p = cfg.params
    return QDavidsonParams(
        eps=p.eps, dtau=p.dtau, svd_threshold=p.svd_threshold, max_dim=p.max_dim
    )


def _chain_spec(cfg: ExperimentConfig) -> ChainSpec:
    p = cfg.params
    return ChainSpec(kind=p.chain_propagator, tol=p.exact_tol, steps=p.chain_steps)


def _stop_rule(
    cfg: ExperimentConfig, h: PauliSum, s0: StateVector, need_bound: bool
) -> StopRule:
    p = cfg.params
    target = p.fidelity_target
    exact_final = None
    if target is not None:
        if cfg.model.n > cfg.oracle_cap:
            raise ConfigError(
                "params.fidelity_target",
                f"oracle cap {cfg.oracle_cap} exceeded by n={cfg.model.n}",
            )
        exact_final = exact_evolve(h, s0, cfg.schedule.t_final, p.exact_tol)
    max_refs = p.max_references
    if need_bound and target is None and max_refs is None and p.max_iterations is None:
        max_refs = max(1, p.max_dim // p.m)
    return StopRule(
        max_references=max_refs,
        max_iterations=p.max_iterations,
        fidelity_target=target,
        t_final=cfg.schedule.t_final if target is not None else None,
        exact_final=exact_final,
    )


def _build_subspace(
    cfg: ExperimentConfig, h: PauliSum, s0: StateVector
) -> tuple[KrylovSubspace, krylov.BuildReport]:
    p = _qd_params(cfg)
    if cfg.method == "qdavidson":
        return krylov.qdavidson_build(h, s0, p, _stop_rule(cfg, h, s0, need_bound=False))
    chain = _chain_spec(cfg)
    stop = _stop_rule(cfg, h, s0, need_bound=True)
    if cfg.method == "mrk":
        return krylov.mrk_build(h, s0, cfg.params.m, cfg.params.tau, stop, p, chain)
    if cfg.method == "mrqd":
        return krylov.mrqd_build(h, s0, cfg.params.m, cfg.params.tau, stop, p, chain)
    raise ConfigError("method", f"{cfg.method!r} does not build a subspace")


def _subspace_rows(
    cfg: ExperimentConfig,
    h: PauliSum,
    s0: StateVector,
    sub: KrylovSubspace,
    grid: np.ndarray,
    obs: list[tuple[str, PauliSum]],
    want_fid: bool,
) -> np.ndarray:
    p = _qd_params(cfg)
    c0 = np.zeros(sub.dimension, dtype=np.complex128)
    c0[0] = 1.0
    ff = krylov.fast_forward(sub, c0, p)
    exact_states = (
        _exact_grid_states(h, s0, grid, cfg.params.exact_tol) if want_fid else None
    )
    rows = []
    for j, t in enumerate(grid):
        c = ff(float(t))
        if want_fid:
            fid, nrm = krylov.fidelity(exact_states[j], sub, c)
        else:
            fid, nrm = float("nan"), float(np.real(np.vdot(c, sub.e @ c)))
        row = [float(t), fid, nrm]
        row.extend(krylov.observable(sub, op, c) for _, op in obs)
        rows.append(row)
    return np.array(rows, dtype=np.float64)


def _direct_rows(
    cfg: ExperimentConfig,
    h: PauliSum,
    s0: StateVector,
    grid: np.ndarray,
    obs: list[tuple[str, PauliSum]],
    want_fid: bool,
) -> np.ndarray:
    exact_states = None
    if cfg.method == "exact" or want_fid:
        exact_states = _exact_grid_states(h, s0, grid, cfg.params.exact_tol)
    if cfg.method == "exact":
        states = exact_states
    else:
        total = cfg.params.trotter_steps
        t_final = cfg.schedule.t_final
        states = []
        for t in grid:
            t = float(t)
            if t == 0.0:
                states.append(StateVector(s0.amps.copy(), s0.n))
                continue
            steps = max(1, int(round(total * t / t_final)))
            states.append(trotter_evolve(h, s0, t, steps))
    rows = []
    for j, t in enumerate(grid):
        s = states[j]
        if cfg.method == "exact":
            fid = 1.0 if want_fid else float("nan")
        elif want_fid:
            fid = float(abs(np.vdot(exact_states[j].amps, s.amps)) ** 2)
        else:
            fid = float("nan")
        row = [float(t), fid, float(s.norm() ** 2)]
        row.extend(_state_expectation(op, s) for _, op in obs)
        rows.append(row)
    return np.array(rows, dtype=np.float64)


def _lindblad_spec(cfg: ExperimentConfig, h: PauliSum) -> LindbladSpec:
    settings = cfg.lindblad or LindbladSettings()
    n = cfg.model.n
    collapses = []
    for c in settings.collapses:
        if c.terms is not None:
            collapses.append((pauli.from_triples(n, c.terms), c.rate))
        elif c.kind == "depolarizing":
            for axis in ("X", "Y", "Z"):
                collapses.append((lindblad.site_collapse(n, c.site, axis), c.rate / 4.0))
        else:
            collapses.append((lindblad.site_collapse(n, c.site, c.kind), c.rate))
    return LindbladSpec(h, tuple(collapses))


def _lindblad_rows(
    cfg: ExperimentConfig,
    h: PauliSum,
    s0: StateVector,
    grid: np.ndarray,
    obs: list[tuple[str, PauliSum]],
    want_fid: bool,
) -> tuple[np.ndarray, dict]:
    settings = cfg.lindblad or LindbladSettings()
    spec = _lindblad_spec(cfg, h)
    liou = lindblad.build_liouvillian(spec)
    rho0 = lindblad.density_from_state(s0)
    tol = cfg.params.exact_tol

    exact_path: list[DensityVector] | None = None
    if want_fid or settings.propagator == "exact":
        exact_path = []
        cur = rho0
        prev = 0.0
        for t in grid:
            cur = lindblad.lindblad_exact_propagate(liou, cur, float(t) - prev, tol)
            prev = float(t)
            exact_path.append(cur)

    meta: dict = {"propagator": settings.propagator}
    if settings.propagator == "exact":
        path = exact_path
    elif settings.propagator == "trotter":
        path = []
        cur = rho0
        prev = 0.0
        total = settings.trotter_steps
        t_final = cfg.schedule.t_final
        for t in grid:
            dt = float(t) - prev
            if dt > 0:
                n_sub = max(1, int(round(total * dt / t_final)))
                sub_tau = dt / n_sub
                for _ in range(n_sub):
                    cur = lindblad.trotter_liouvillian_step(spec, sub_tau, cur)
            prev = float(t)
            path.append(cur)
    else:  # chain fast-forward
        chain = lindblad.liouvillian_chain(
            liou, rho0, settings.chain_m, settings.chain_tau, tol
        )
        c0 = np.zeros(len(chain), dtype=np.complex128)
        c0[0] = float(np.linalg.norm(rho0.amps))
        ff = lindblad.open_fast_forward(liou, chain, c0, cfg.params.svd_threshold)
        B = np.stack([b.amps for b in chain], axis=1)
        path = [DensityVector(B @ ff(float(t)), s0.n) for t in grid]
        meta["dimension"] = len(chain)

    rows = []
    for j, t in enumerate(grid):
        rho = path[j]
        if want_fid and settings.propagator != "exact":
            ex = exact_path[j]
            denom = np.linalg.norm(ex.amps) * np.linalg.norm(rho.amps)
            fid = float(np.real(np.vdot(ex.amps, rho.amps)) / denom) if denom else 0.0
        elif want_fid:
            fid = 1.0
        else:
            fid = float("nan")
        row = [float(t), fid, float(rho.trace().real)]
        row.extend(lindblad.expectation(op, rho) for _, op in obs)
        rows.append(row)
    return np.array(rows, dtype=np.float64), meta


def run(cfg: ExperimentConfig) -> RunRecord:
    """Execute one experiment; deterministic for a fixed config."""
    t_start = time.perf_counter()
    h = build_model(cfg)
    s0 = initial_state(cfg)
    grid = _grid(cfg)
    obs = _observable_ops(cfg)
    want_fid = _want_fidelity(cfg)
    columns = ["t", "fidelity", "norm"] + [name for name, _ in obs]
    subspace_meta: dict = {}
    timings: dict = {}
    sub = None

    if cfg.method in ("exact", "trotter"):
        rows = _direct_rows(cfg, h, s0, grid, obs, want_fid)
    elif cfg.method == "lindblad":
        rows, subspace_meta = _lindblad_rows(cfg, h, s0, grid, obs, want_fid)
    else:
        t0 = time.perf_counter()
        sub, report = _build_subspace(cfg, h, s0)
        timings["build_seconds"] = time.perf_counter() - t0
        subspace_meta = {
            "dimension": sub.dimension,
            "iterations": report.iterations,
            "references": report.references,
            "converged": report.converged,
            "residues": report.residues,
            "eigenvalues": report.eigenvalues,
        }
        rows = _subspace_rows(cfg, h, s0, sub, grid, obs, want_fid)
    timings["total_seconds"] = time.perf_counter() - t_start
    return RunRecord(snapshot(cfg), columns, rows, subspace_meta, timings, sub)


def record_name(cfg: ExperimentConfig) -> str:
    if cfg.output.name:
        return cfg.output.name
    return f"{cfg.method}_n{cfg.model.n}"


def csv_bytes(record: RunRecord) -> bytes:
    lines = ["# config: " + json.dumps(record.config, sort_keys=True)]
    lines.append(",".join(record.columns))
    for row in record.rows:
        lines.append(",".join(_fmt(x) for x in row))
    return ("\n".join(lines) + "\n").encode()


def meta_json_bytes(record: RunRecord) -> bytes:
    payload = {
        "format": RECORD_FORMAT,
        "config": record.config,
        "columns": record.columns,
        "subspace": record.subspace,
    }
    return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode()


def full_json_bytes(record: RunRecord) -> bytes:
    payload = {
        "format": RECORD_FORMAT,
        "config": record.config,
        "columns": record.columns,
        "rows": [[float(x) for x in row] for row in record.rows],
        "subspace": record.subspace,
    }
    return (json.dumps(payload, indent=2, sort_keys=True) + "\n").encode()


def parse_csv(path) -> RunRecord:
    """Reconstruct a record from a CSV written by :func:`write_record`."""
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# config: "):
        raise ValueError(f"{path} is missing the embedded config line")
    config = json.loads(lines[0][len("# config: ") :])
    columns = lines[1].split(",")
    rows = np.array(
        [[float(v) for v in line.split(",")] for line in lines[2:] if line],
        dtype=np.float64,
    )
    return RunRecord(config, columns, rows)


def write_record(record: RunRecord, out_dir, name: str, fmt: str = "csv") -> dict:
    """Write the record's data files; returns the path map.

    Timings land in a ``.timings.json`` sidecar, which is the only
    non-deterministic output file.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths: dict[str, Path] = {}
    if fmt == "csv":
        paths["csv"] = out / f"{name}.csv"
        paths["csv"].write_bytes(csv_bytes(record))
        paths["meta"] = out / f"{name}.json"
        paths["meta"].write_bytes(meta_json_bytes(record))
    else:
        paths["json"] = out / f"{name}.json"
        paths["json"].write_bytes(full_json_bytes(record))
    if record.timings:
        sidecar = out / f"{name}.timings.json"
        sidecar.write_text(json.dumps(record.timings, indent=2, sort_keys=True) + "\n")
        paths["timings"] = sidecar
    return paths


def _sweep_cell(payload: dict) -> dict:
    """Grow one (n, method) cell until the fidelity target passes."""
    cfg: ExperimentConfig = payload["cfg"]
    n = payload["n"]
    method = payload["method"]
    target = payload["target"]
    chain_kind = payload.get("chain_kind")

    model = replace(cfg.model, n=n)
    params = replace(cfg.params, fidelity_target=target, max_references=None)
    if chain_kind is not None:
        params = replace(params, chain_propagator=chain_kind)
    cell_cfg = replace(cfg, model=model, method=method, params=params)
    if cell_cfg.initial_state != "neel" and len(cell_cfg.initial_state) != n:
        raise ConfigError(
            "initial_state", "sizes other than the config's need the 'neel' seed"
        )
    if n > cfg.oracle_cap:
        raise ConfigError("model.n", f"size {n} exceeds oracle cap {cfg.oracle_cap}")
    h = build_model(cell_cfg)
    s0 = initial_state(cell_cfg)
    t0 = time.perf_counter()
    sub, report = _build_subspace(cell_cfg, h, s0)
    seconds = time.perf_counter() - t0
    fid = report.fidelity_history[-1][1] if report.fidelity_history else float("nan")
    return {
        "n": n,
        "method": method,
        "dimension": sub.dimension,
        "iterations": report.iterations,
        "references": report.references,
        "fidelity": fid,
        "converged": report.converged,
        "seconds": seconds,
    }


def scaling_sweep(
    cfg: ExperimentConfig,
    sizes: list[int],
    fidelity_target: float,
    methods: tuple[str, ...] = SWEEP_METHOD_ORDER,
    threads: int = 1,
) -> dict:
    """Required subspace dimension per system size and method.

    Growth is incremental (grow-until-pass), so the reported dimension is
    the first one whose fast-forwarded state reaches the target overlap at
    t_final.  Cells that hit ``max_dim`` first are flagged unconverged.
    """
    for m in methods:
        if m not in SWEEP_METHOD_ORDER:
            raise ConfigError("methods", f"{m!r} is not a subspace method")
    payloads = [
        {"cfg": cfg, "n": n, "method": method, "target": fidelity_target}
        for n in sorted(sizes)
        for method in sorted(methods)
    ]
    if threads > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_sweep_cell, payloads))
    else:
        rows = [_sweep_cell(p) for p in payloads]
    rows.sort(key=lambda r: (r["n"], r["method"]))
    timings = {f"{r['n']}/{r['method']}": r.pop("seconds") for r in rows}
    return {
        "format": SWEEP_FORMAT,
        "config": snapshot(cfg),
        "t_final": cfg.schedule.t_final,
        "fidelity_target": fidelity_target,
        "rows": rows,
        "_timings": timings,
    }


def trotter_compare(
    cfg: ExperimentConfig,
    tau: float,
    sizes: list[int],
    fidelity_target: float = 0.9,
    methods: tuple[str, ...] = ("mrqd", "mrk"),
    threads: int = 1,
) -> dict:
    """Required dimension with exact versus product-formula chain generation.

    Runs the scaling sweep twice per multi-reference method and pairs the
    columns; the product-formula chains use one step of size ``tau`` per
    link.
    """
    for m in methods:
        if m not in ("mrk", "mrqd"):
            raise ConfigError("methods", f"{m!r} has no chain propagator to compare")
    base_params = replace(cfg.params, tau=tau, chain_steps=1)
    base = replace(cfg, params=base_params)
    payloads = []
    for n in sorted(sizes):
        for method in sorted(methods):
            for kind in ("exact", "trotter"):
                payloads.append(
                    {
                        "cfg": base,
                        "n": n,
                        "method": method,
                        "target": fidelity_target,
                        "chain_kind": kind,
                    }
                )
    if threads > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=threads) as pool:
            cells = list(pool.map(_sweep_cell, payloads))
    else:
        cells = [_sweep_cell(p) for p in payloads]
    by_key = {}
    for p, c in zip(payloads, cells):
        by_key[(p["n"], p["method"], p["chain_kind"])] = c
    rows = []
    timings = {}
    for n in sorted(sizes):
        for method in sorted(methods):
            ex = by_key[(n, method, "exact")]
            tr = by_key[(n, method, "trotter")]
            rows.append(
                {
                    "n": n,
                    "method": method,
                    "dimension_exact": ex["dimension"],
                    "iterations_exact": ex["iterations"],
                    "converged_exact": ex["converged"],
                    "dimension_trotter": tr["dimension"],
                    "iterations_trotter": tr["iterations"],
                    "converged_trotter": tr["converged"],
                }
            )
            timings[f"{n}/{method}"] = ex["seconds"] + tr["seconds"]
    return {
        "format": COMPARE_FORMAT,
        "config": snapshot(base),
        "tau": tau,
        "fidelity_target": fidelity_target,
        "rows": rows,
        "_timings": timings,
    }


def write_table(table: dict, out_dir, name: str) -> dict:
    """Write a sweep/compare table as JSON; timings go to the sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    timings = table.pop("_timings", None)
    paths = {"json": out / f"{name}.json"}
    paths["json"].write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
    if timings:
        sidecar = out / f"{name}.timings.json"
        sidecar.write_text(json.dumps(timings, indent=2, sort_keys=True) + "\n")
        paths["timings"] = sidecar
    return paths

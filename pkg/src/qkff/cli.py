"""Command-line entry point.

Every algorithm is a subcommand driven by a JSON config; flags override
config keys.  Exit codes: 0 success, 2 configuration error, 3 sweep cells
left unconverged.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import krylov, plots, runner
from .config import (
    ConfigError,
    ExperimentConfig,
    apply_overrides,
    config_from_dict,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_UNCONVERGED = 3

RUN_COMMANDS = {
    "evolve": None,  # method taken from the config (exact or trotter)
    "qdavidson": "qdavidson",
    "mrk": "mrk",
    "mrqd": "mrqd",
    "lindblad": "lindblad",
}


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="path to the JSON config")
    p.add_argument("--out", default=None, help="output directory (overrides config)")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.add_argument("--oracle-cap", type=int, default=None, dest="oracle_cap")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY.PATH=VALUE",
        help="override a config key, e.g. --set params.max_dim=40",
    )
    p.add_argument(
        "--no-plot",
        action="store_true",
        help="skip rendering the PNG next to the data output",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qkff",
        description="Krylov-subspace fast-forwarding of spin-chain dynamics",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("evolve", "direct exact or product-formula time evolution"),
        ("qdavidson", "iterative correction-vector subspace, then fast-forward"),
        ("mrk", "multi-reference real-time-chain subspace, then fast-forward"),
        ("mrqd", "chained correction-vector references, then fast-forward"),
        ("lindblad", "open-system propagation in the vectorized representation"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name in ("qdavidson", "mrk", "mrqd"):
            p.add_argument(
                "--save-subspace",
                default=None,
                metavar="DIR",
                help="checkpoint the built subspace into DIR",
            )
    p = sub.add_parser("scaling-sweep", help="required dimension vs system size")
    _add_common(p)
    p.add_argument("--sizes", default="4,6,8", help="comma-separated system sizes")
    p.add_argument("--target", type=float, default=0.9, help="fidelity target at t_final")
    p.add_argument(
        "--methods",
        default="qdavidson,mrqd,mrk",
        help="comma-separated subset of qdavidson,mrqd,mrk",
    )
    p = sub.add_parser(
        "trotter-compare", help="exact vs product-formula chain generation"
    )
    _add_common(p)
    p.add_argument("--tau", type=float, default=0.1, help="chain step size")
    p.add_argument("--sizes", default="4,6", help="comma-separated system sizes")
    p.add_argument("--target", type=float, default=0.9)
    p.add_argument("--methods", default="mrqd,mrk")
    return parser


def _load(args: argparse.Namespace, force_method: str | None) -> ExperimentConfig:
    path = Path(args.config)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(str(path), f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(
            str(path), f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc
    overrides = list(args.set)
    if force_method is not None:
        overrides.append(f"method={force_method}")
    if args.out is not None:
        overrides.append(f"output.path={args.out}")
    if args.format is not None:
        overrides.append(f"output.format={args.format}")
    if args.oracle_cap is not None:
        overrides.append(f"oracle_cap={args.oracle_cap}")
    raw = apply_overrides(raw, overrides)
    return config_from_dict(raw, source=str(path))


def _run_command(args: argparse.Namespace, command: str) -> int:
    force = RUN_COMMANDS[command]
    cfg = _load(args, force)
    if command == "evolve" and cfg.method not in ("exact", "trotter"):
        raise ConfigError("method", "evolve needs method 'exact' or 'trotter'")
    record = runner.run(cfg)
    name = runner.record_name(cfg)
    paths = runner.write_record(record, cfg.output.path, name, cfg.output.format)
    if not args.no_plot:
        paths["figure"] = plots.render_run_figure(record, Path(cfg.output.path) / f"{name}.png")
    save_dir = getattr(args, "save_subspace", None)
    if save_dir and record.subspace_obj is not None:
        krylov.save_subspace(save_dir, record.subspace_obj, record.config.get("params"))
        paths["subspace"] = Path(save_dir)
    for kind, p in sorted(paths.items()):
        print(f"{kind}: {p}")
    return EXIT_OK


def _parse_sizes(text: str) -> list[int]:
    try:
        return [int(s) for s in text.split(",") if s]
    except ValueError as exc:
        raise ConfigError("--sizes", f"expected comma-separated integers, got {text!r}") from exc


def _sweep_command(args: argparse.Namespace) -> int:
    cfg = _load(args, None)
    sizes = _parse_sizes(args.sizes)
    methods = tuple(m for m in args.methods.split(",") if m)
    table = runner.scaling_sweep(cfg, sizes, args.target, methods, threads=args.threads)
    name = f"scaling_sweep_{cfg.model.jx:g}_{cfg.model.jy:g}_{cfg.model.jz:g}_{cfg.model.h:g}"
    paths = runner.write_table(table, cfg.output.path, name)
    if not args.no_plot:
        paths["figure"] = plots.render_sweep_figure(
            table, Path(cfg.output.path) / f"{name}.png"
        )
    for kind, p in sorted(paths.items()):
        print(f"{kind}: {p}")
    if not all(r["converged"] for r in table["rows"]):
        print("warning: unconverged sweep cells", file=sys.stderr)
        return EXIT_UNCONVERGED
    return EXIT_OK


def _compare_command(args: argparse.Namespace) -> int:
    cfg = _load(args, None)
    sizes = _parse_sizes(args.sizes)
    methods = tuple(m for m in args.methods.split(",") if m)
    table = runner.trotter_compare(
        cfg, args.tau, sizes, args.target, methods, threads=args.threads
    )
    name = f"trotter_compare_tau{args.tau:g}"
    paths = runner.write_table(table, cfg.output.path, name)
    if not args.no_plot:
        paths["figure"] = plots.render_compare_figure(
            table, Path(cfg.output.path) / f"{name}.png"
        )
    for kind, p in sorted(paths.items()):
        print(f"{kind}: {p}")
    converged = all(
        r["converged_exact"] and r["converged_trotter"] for r in table["rows"]
    )
    if not converged:
        print("warning: unconverged sweep cells", file=sys.stderr)
        return EXIT_UNCONVERGED
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command in RUN_COMMANDS:
            return _run_command(args, args.command)
        if args.command == "scaling-sweep":
            return _sweep_command(args)
        return _compare_command(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Figure rendering for run records and sweep tables.

Every report path can drop a PNG next to its delimited output; rendering is
deterministic (fixed metadata, no timestamps) so reruns produce identical
files.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_META = {"Software": "qkff"}
_DPI = 150


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=_DPI, metadata=_META)
    plt.close(fig)
    return path


def render_run_figure(record, path) -> Path:
    """Observable traces stacked over a fidelity/norm panel."""
    cols = record.columns
    rows = np.asarray(record.rows)
    t = rows[:, 0]
    obs_names = cols[3:]
    n_panels = max(1, len(obs_names)) + 1
    fig, axes = plt.subplots(
        n_panels, 1, sharex=True, figsize=(6.0, 2.2 * n_panels), squeeze=False
    )
    axes = axes[:, 0]
    if obs_names:
        for k, name in enumerate(obs_names):
            axes[k].plot(t, rows[:, 3 + k], color="C0")
            axes[k].set_ylabel(name)
            axes[k].grid(alpha=0.3)
    else:
        axes[0].plot(t, rows[:, 2], color="C0")
        axes[0].set_ylabel("norm")
        axes[0].grid(alpha=0.3)
    ax = axes[-1]
    fid = rows[:, 1]
    if np.isfinite(fid).any():
        ax.plot(t, fid, color="C3", label="fidelity")
    ax.plot(t, rows[:, 2], color="C2", ls="--", label="norm")
    ax.set_xlabel("t")
    ax.set_ylabel("fidelity / norm")
    ax.grid(alpha=0.3)
    ax.legend(loc="best", fontsize=8)
    method = record.config.get("method", "")
    n = record.config.get("model", {}).get("n", "")
    fig.suptitle(f"{method} (n={n})", fontsize=10)
    fig.tight_layout()
    return _save(fig, path)


def render_sweep_figure(table, path) -> Path:
    """Required dimension and iteration count versus system size, semilog."""
    rows = table["rows"]
    methods = sorted({r["method"] for r in rows})
    fig, (ax_dim, ax_it) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    for method in methods:
        pts = sorted((r["n"], r) for r in rows if r["method"] == method)
        ns = [n for n, _ in pts]
        dims = [r["dimension"] for _, r in pts]
        iters = [max(r["iterations"], 1) for _, r in pts]
        marks = ["o" if r["converged"] else "x" for _, r in pts]
        ax_dim.semilogy(ns, dims, label=method, marker=marks[0])
        ax_it.semilogy(ns, iters, label=method, marker=marks[0])
    ax_dim.set_xlabel("system size n")
    ax_dim.set_ylabel(f"dimension for F >= {table['fidelity_target']}")
    ax_it.set_xlabel("system size n")
    ax_it.set_ylabel("iterations")
    for ax in (ax_dim, ax_it):
        ax.grid(alpha=0.3, which="both")
        ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)


def render_compare_figure(table, path) -> Path:
    """Exact versus product-formula chain generation, paired per method."""
    rows = table["rows"]
    methods = sorted({r["method"] for r in rows})
    fig, ax = plt.subplots(figsize=(5.5, 3.8))
    for k, method in enumerate(methods):
        pts = sorted((r["n"], r) for r in rows if r["method"] == method)
        ns = [n for n, _ in pts]
        ax.semilogy(
            ns,
            [r["dimension_exact"] for _, r in pts],
            color=f"C{k}",
            marker="o",
            label=f"{method} (exact chain)",
        )
        ax.semilogy(
            ns,
            [r["dimension_trotter"] for _, r in pts],
            color=f"C{k}",
            marker="s",
            ls="--",
            label=f"{method} (trotter chain, tau={table['tau']})",
        )
    ax.set_xlabel("system size n")
    ax.set_ylabel(f"dimension for F >= {table['fidelity_target']}")
    ax.grid(alpha=0.3, which="both")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return _save(fig, path)

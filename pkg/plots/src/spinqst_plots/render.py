"""Render the figure CSV datasets into publication-style images.

Strictly presentation: reads the CSV files written by the simulation CLI
and draws them.  Output is deterministic for identical input (fixed SVG
hash salt, no embedded timestamps), so rendered vector files are diffable.

Figures
-------
fig2a / fig2b   averaged transfer fidelity F(t) vs t/T, one curve per chain
                length (even lengths on panel a, odd on panel b)
fig3            infidelity 1 - F(T) vs J_B*T, log y, one curve per length
fig4            boundary couplings J_S, J_R vs t/T (units of 1/T)
fig5            heatmap of F(T) over static coupling offsets
fig6            F(T) vs dephasing rate gamma/J_M
zeno_gap        strong-bus validity: distances vs J_B*T, log-log
"""

from __future__ import annotations

import argparse
import csv
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

matplotlib.rcParams["svg.hashsalt"] = "spinqst-plots"

FIGURE_IDS = ("fig2a", "fig2b", "fig3", "fig4", "fig5", "fig6", "zeno_gap")

REQUIRED_COLUMNS = {
    "fig2a": ("t_over_T", "F"),
    "fig2b": ("t_over_T", "F"),
    "fig3": ("N", "J_B_times_T", "infidelity"),
    "fig4": ("t", "J_S", "J_R"),
    "fig5": ("delta_JS_rel", "delta_JR_rel", "F_T"),
    "fig6": ("gamma_over_J_M", "F_T"),
    "zeno_gap": ("J_B_times_T", "propagator_distance", "state_distance"),
}


class SchemaError(ValueError):
    """A CSV is missing required columns or has no data rows."""


@dataclass(frozen=True)
class FigureSpec:
    figure_id: str
    csv_paths: tuple
    image_path: Path

    def __post_init__(self):
        if self.figure_id not in FIGURE_IDS:
            raise ValueError(f"unknown figure id {self.figure_id!r}; "
                             f"expected one of {FIGURE_IDS}")


@dataclass
class RenderResult:
    image_path: Path
    ymax: float = float("nan")
    curves: dict = field(default_factory=dict)


def read_columns(path: Path, required: tuple) -> dict:
    """Load the required columns; raise SchemaError with a column diff."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: file is empty") from None
        rows = list(reader)
    missing = [c for c in required if c not in header]
    if missing:
        raise SchemaError(
            f"{path}: missing column(s) {missing}; found {header}")
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    data = np.array(rows, dtype=float)
    idx = {c: header.index(c) for c in required}
    return {c: data[:, idx[c]] for c in required}


def _save(fig, image_path: Path) -> None:
    image_path.parent.mkdir(parents=True, exist_ok=True)
    fmt = image_path.suffix.lstrip(".")
    fig.savefig(image_path, format=fmt, metadata={"Date": None}
                if fmt == "svg" else None)
    plt.close(fig)


def _chain_length_label(path: Path) -> str:
    m = re.search(r"_N(\d+)", path.name)
    return f"N = {m.group(1)}" if m else path.stem


def _render_fig2(spec: FigureSpec) -> RenderResult:
    fig, ax = plt.subplots(figsize=(4.8, 3.4))
    result = RenderResult(image_path=spec.image_path)
    for path in spec.csv_paths:
        cols = read_columns(Path(path), REQUIRED_COLUMNS[spec.figure_id])
        label = _chain_length_label(Path(path))
        ax.plot(cols["t_over_T"], cols["F"], label=label)
        result.curves[label] = float(cols["F"][-1])
    ax.set_xlabel("t / T")
    ax.set_ylabel("F(t)")
    ax.set_xlim(0.0, 1.0)
    ax.set_ylim(0.45, 1.02)
    ax.legend(loc="upper left", frameon=False)
    fig.tight_layout()
    result.ymax = 1.0
    _save(fig, spec.image_path)
    return result


def _render_fig3(spec: FigureSpec) -> RenderResult:
    cols = read_columns(Path(spec.csv_paths[0]), REQUIRED_COLUMNS["fig3"])
    fig, ax = plt.subplots(figsize=(4.8, 3.4))
    result = RenderResult(image_path=spec.image_path)
    for N in np.unique(cols["N"]).astype(int):
        sel = cols["N"] == N
        ax.plot(cols["J_B_times_T"][sel], cols["infidelity"][sel],
                marker="o", label=f"N = {N}")
        result.curves[f"N = {N}"] = float(np.min(cols["infidelity"][sel]))
    ax.set_xscale("log")
    ax.set_yscale("log")
    lo = min(1e-3, 0.8 * float(np.min(cols["infidelity"])))
    hi = max(1e-1, 1.2 * float(np.max(cols["infidelity"])))
    ax.set_ylim(lo, hi)
    ax.set_xlabel(r"$J_B T$")
    ax.set_ylabel(r"$1 - F(T)$")
    ax.legend(frameon=False)
    fig.tight_layout()
    result.ymax = hi
    _save(fig, spec.image_path)
    return result


def _render_fig4(spec: FigureSpec) -> RenderResult:
    cols = read_columns(Path(spec.csv_paths[0]), REQUIRED_COLUMNS["fig4"])
    fig, ax = plt.subplots(figsize=(4.8, 3.4))
    ax.plot(cols["t"], cols["J_S"], label=r"$J_S$")
    ax.plot(cols["t"], cols["J_R"], label=r"$J_R$", linestyle="--")
    ax.axhline(0.0, color="0.8", linewidth=0.6, zorder=0)
    ax.set_xlabel("t / T")
    ax.set_ylabel("coupling  (1/T)")
    ax.set_xlim(0.0, 1.0)
    ax.legend(frameon=False)
    fig.tight_layout()
    ymax = float(max(np.max(cols["J_S"]), np.max(cols["J_R"])))
    _save(fig, spec.image_path)
    return RenderResult(image_path=spec.image_path, ymax=ymax)


def _render_fig5(spec: FigureSpec) -> RenderResult:
    cols = read_columns(Path(spec.csv_paths[0]), REQUIRED_COLUMNS["fig5"])
    dS = np.unique(cols["delta_JS_rel"])
    dR = np.unique(cols["delta_JR_rel"])
    F = np.full((len(dS), len(dR)), np.nan)
    iS = np.searchsorted(dS, cols["delta_JS_rel"])
    iR = np.searchsorted(dR, cols["delta_JR_rel"])
    F[iS, iR] = cols["F_T"]
    fig, ax = plt.subplots(figsize=(4.6, 3.8))
    mesh = ax.pcolormesh(dR, dS, F, shading="nearest", cmap="viridis")
    fig.colorbar(mesh, ax=ax, label="F(T)")
    ax.set_xlabel(r"$\delta J_R / J_R$")
    ax.set_ylabel(r"$\delta J_S / J_S$")
    fig.tight_layout()
    _save(fig, spec.image_path)
    return RenderResult(image_path=spec.image_path, ymax=float(np.nanmax(F)))


def _render_fig6(spec: FigureSpec) -> RenderResult:
    cols = read_columns(Path(spec.csv_paths[0]), REQUIRED_COLUMNS["fig6"])
    fig, ax = plt.subplots(figsize=(4.8, 3.4))
    ax.plot(cols["gamma_over_J_M"], cols["F_T"], marker="o")
    ax.set_xlabel(r"$\gamma / J_M$")
    ax.set_ylabel("F(T)")
    fig.tight_layout()
    _save(fig, spec.image_path)
    return RenderResult(image_path=spec.image_path,
                        ymax=float(np.max(cols["F_T"])))


def _render_zeno_gap(spec: FigureSpec) -> RenderResult:
    cols = read_columns(Path(spec.csv_paths[0]), REQUIRED_COLUMNS["zeno_gap"])
    fig, ax = plt.subplots(figsize=(4.8, 3.4))
    ax.plot(cols["J_B_times_T"], cols["propagator_distance"], marker="o",
            label="propagator distance")
    ax.plot(cols["J_B_times_T"], cols["state_distance"], marker="s",
            label="state distance")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel(r"$J_B T$")
    ax.set_ylabel("phase-aligned distance")
    ax.legend(frameon=False)
    fig.tight_layout()
    _save(fig, spec.image_path)
    return RenderResult(image_path=spec.image_path,
                        ymax=float(np.max(cols["propagator_distance"])))


_RENDERERS = {
    "fig2a": _render_fig2,
    "fig2b": _render_fig2,
    "fig3": _render_fig3,
    "fig4": _render_fig4,
    "fig5": _render_fig5,
    "fig6": _render_fig6,
    "zeno_gap": _render_zeno_gap,
}


def render(spec: FigureSpec) -> RenderResult:
    """Render one figure; raises SchemaError on malformed input and writes
    no image in that case."""
    for path in spec.csv_paths:
        if not Path(path).exists():
            raise SchemaError(f"{path}: no such file")
    return _RENDERERS[spec.figure_id](spec)


def build_specs(csv_dir, out_dir, fmt: str = "svg") -> list[FigureSpec]:
    """Figure specs for every dataset present in ``csv_dir``."""
    csv_dir = Path(csv_dir)
    out_dir = Path(out_dir)
    specs: list[FigureSpec] = []

    fig2 = sorted(csv_dir.glob("fig2_N*.csv"))
    even = tuple(p for p in fig2 if int(re.search(r"_N(\d+)", p.name).group(1)) % 2 == 0)
    odd = tuple(p for p in fig2 if int(re.search(r"_N(\d+)", p.name).group(1)) % 2 == 1)
    if even:
        specs.append(FigureSpec("fig2a", even, out_dir / f"fig2a.{fmt}"))
    if odd:
        specs.append(FigureSpec("fig2b", odd, out_dir / f"fig2b.{fmt}"))
    for fid in ("fig3", "fig4", "fig5", "fig6", "zeno_gap"):
        path = csv_dir / f"{fid}.csv"
        if path.exists():
            specs.append(FigureSpec(fid, (path,), out_dir / f"{fid}.{fmt}"))
    return specs


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render_figures",
        description="Render simulation CSV datasets into figures")
    parser.add_argument("csv_dir")
    parser.add_argument("out_dir")
    parser.add_argument("--format", choices=("svg", "png"), default="svg")
    args = parser.parse_args(argv)

    specs = build_specs(args.csv_dir, args.out_dir, args.format)
    if not specs:
        print(f"no figure datasets found in {args.csv_dir}", file=sys.stderr)
        return 1
    status = 0
    for spec in specs:
        try:
            result = render(spec)
        except SchemaError as exc:
            print(f"{spec.figure_id}: {exc}", file=sys.stderr)
            status = 1
            continue
        print(f"{spec.figure_id}: wrote {result.image_path}")
    return status


if __name__ == "__main__":
    sys.exit(main())

"""File-only figures for run directories and sweep summaries."""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import tomli  # noqa: E402
from matplotlib.colors import ListedColormap  # noqa: E402
from matplotlib.patches import Patch  # noqa: E402

from . import storage  # noqa: E402

__all__ = ["PlotError", "VERDICT_STATES", "plot_timeseries", "plot_free_energy", "plot_sweep", "emit_plots"]

VERDICT_STATES = ("completed", "blowup", "resolution_exceeded", "mass_leak")
_COLORS = ("#4c9a2a", "#c0392b", "#e0a800", "#5b6ee1", "#999999")


class PlotError(ValueError):
    pass


def _require(cols: dict, names) -> None:
    missing = [n for n in names if n not in cols]
    if missing:
        raise PlotError(f"missing columns: {', '.join(missing)}")
    if len(cols[names[0]]) == 0:
        raise PlotError("time series is empty")


def plot_timeseries(cols: dict, out: Path, kappa: float, delta: float) -> Path:
    """Log-scale z-mode amplitudes of N with the exp(-delta kappa^(1/3) k^(2/3) t) reference slopes."""
    names = ["t", "amp_N_k1", "amp_N_k2", "amp_N_k3", "amp_N_k4"]
    _require(cols, names)
    t = cols["t"]
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    for k in range(1, 5):
        a = cols[f"amp_N_k{k}"]
        (line,) = ax.semilogy(t, np.where(a > 0, a, np.nan), label=f"k = {k}")
        if a[0] > 0:
            ref = a[0] * np.exp(-delta * kappa ** (1 / 3) * k ** (2 / 3) * t)
            ax.semilogy(t, ref, ls="--", color=line.get_color(), lw=0.8)
    ax.set_xlabel("t")
    ax.set_ylabel("||N_k||")
    ax.set_title("mode amplitudes (dashed: reference decay)")
    ax.legend(fontsize=8)
    path = out / "mode_amplitudes.png"
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_free_energy(cols: dict, out: Path) -> Path:
    names = ["t", "free_energy_F", "energy_E"]
    _require(cols, names)
    fig, ax = plt.subplots(figsize=(6.4, 4.2))
    ax.plot(cols["t"], cols["free_energy_F"], label="F")
    ax.plot(cols["t"], cols["energy_E"], ls="--", label="E")
    ax.set_xlabel("t")
    ax.set_ylabel("free energy")
    ax.legend()
    path = out / "free_energy.png"
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_sweep(summary_csv: Path, out: Path, x: str = "epsilon", y: str = "M") -> Path:
    """Heatmap of verdicts over two swept parameters; the legend lists every verdict state."""
    with open(summary_csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise PlotError(f"{summary_csv}: no rows")
    for name in (x, y, "verdict"):
        if name not in rows[0]:
            raise PlotError(f"missing columns: {name}")
    xs = sorted({float(r[x]) for r in rows})
    ys = sorted({float(r[y]) for r in rows})
    states = VERDICT_STATES + ("error",)
    grid = np.full((len(ys), len(xs)), np.nan)
    for r in rows:
        code = states.index(r["verdict"]) if r["verdict"] in states else len(states) - 1
        grid[ys.index(float(r[y])), xs.index(float(r[x]))] = code
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    ax.imshow(grid, origin="lower", aspect="auto", cmap=ListedColormap(_COLORS),
              vmin=-0.5, vmax=len(states) - 0.5, interpolation="nearest")
    ax.set_xticks(range(len(xs)), [f"{v:g}" for v in xs])
    ax.set_yticks(range(len(ys)), [f"{v:g}" for v in ys])
    ax.set_xlabel(x)
    ax.set_ylabel(y)
    handles = [Patch(color=_COLORS[i], label=s) for i, s in enumerate(VERDICT_STATES)]
    ax.legend(handles=handles, loc="upper left", bbox_to_anchor=(1.02, 1), fontsize=8)
    path = out / "sweep_verdicts.png"
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)
    return path


def emit_plots(directory) -> list[Path]:
    """All figures that apply to a run or sweep directory."""
    d = Path(directory)
    made = []
    if (d / "sweep_summary.csv").exists():
        made.append(plot_sweep(d / "sweep_summary.csv", d))
    if (d / "diagnostics.csv").exists():
        cols = storage.read_csv(d / "diagnostics.csv")
        with open(d / "resolved_config.toml", "rb") as fh:
            paper = tomli.load(fh)["paper"]
        made.append(plot_timeseries(cols, d, paper["kappa"], paper["delta"]))
        made.append(plot_free_energy(cols, d))
    if not made:
        raise PlotError(f"{d} holds neither diagnostics.csv nor sweep_summary.csv")
    return made

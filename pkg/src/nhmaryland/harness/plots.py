"""SVG renderings of the experiment data (matplotlib is optional)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import ConfigError


def _pyplot():
    try:
        import matplotlib
    except ImportError as exc:
        raise ConfigError("--plot needs matplotlib; install the 'plot' extra") from exc
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "nhmaryland"
    import matplotlib.pyplot as plt
    return plt


def plot_spectra(panels, path: Path) -> Path:
    plt = _pyplot()
    fig, axes = plt.subplots(2, len(panels), figsize=(3.2 * len(panels), 6), squeeze=False)
    for k, p in enumerate(panels):
        ax = axes[0, k]
        for arc in p.loops.arcs:
            ax.plot(arc.energy.real, arc.energy.imag, lw=0.8, color="0.6")
        sc = ax.scatter(p.energies.real, p.energies.imag, c=np.log10(p.ipr), s=4, cmap="viridis")
        ax.set_title(f"eps = {p.epsilon:g}")
        ax.set_xlabel("Re E")
        ax.set_ylabel("Im E")
        fig.colorbar(sc, ax=ax, label="log10 IPR")
        ax = axes[1, k]
        ax.plot(p.energies.real, p.ipr, ".", ms=2)
        ax.axhline(p.tau, color="r", lw=0.5)
        ax.set_yscale("log")
        ax.set_xlabel("Re E")
        ax.set_ylabel("IPR")
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    return path


def plot_winding(rows, eps1: float, eps2: float, path: Path) -> Path:
    plt = _pyplot()
    eps = [r.epsilon for r in rows]
    fig, ax = plt.subplots(figsize=(5, 3))
    ax.step(eps, [r.w1 for r in rows], where="mid", label="w1")
    ax.step(eps, [r.w2 + 0.03 for r in rows], where="mid", label="w2")
    for e in (eps1, eps2):
        ax.axvline(e, color="k", lw=0.5)
    ax.set_xlabel("epsilon")
    ax.set_ylabel("winding")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    return path


def plot_rotations(result, path: Path) -> Path:
    plt = _pyplot()
    ev = result.flow.eigenvalues
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.plot(ev.real, ev.imag, lw=0.6)
    ax.plot(ev[0].real, ev[0].imag, "k.", ms=3)
    ax.plot([result.base_energy.real], [result.base_energy.imag], "rx")
    ax.set_xlabel("Re E")
    ax.set_ylabel("Im E")
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)
    return path

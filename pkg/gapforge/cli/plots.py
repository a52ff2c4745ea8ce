"""
SVG figures for band structures, potentials and sweeps.
"""

from pathlib import Path
from typing import Dict, Optional, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from gapforge.bands.dispersion import DispersionTable
from gapforge.driver.sweeps import ContrastSweep, LatticeSweep
from gapforge.hill1d.steps import StepPotential
from gapforge.hill1d.transfer import EdgeEigenfunctions
from gapforge.lattice.bravais import LatticeParams, SQUARE, basis_from_params
from gapforge.operators.potential import PotentialGrid
import logging

logger = logging.getLogger(__name__)


def _save(fig, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    matplotlib.rcParams["svg.hashsalt"] = "gapforge"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info(f"Wrote {path}")
    return path


def plot_bands(path: Path, table: DispersionTable, m: Optional[int] = None) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4.5))
    x = table.ks.arc
    for j in range(table.bands):
        ax.plot(x, table.energies[j], color="black", linewidth=1.0)
    if m is not None and m < table.bands:
        alpha, beta = table.energies[m - 1].max(), table.energies[m].min()
        if beta > alpha:
            ax.axhspan(alpha, beta, color="tab:blue", alpha=0.2, label=f"gap {m}")
            ax.legend(loc="upper left")
    if table.ks.labels:
        ticks = [float(x[i]) for i, _ in table.ks.labels]
        names = [name for _, name in table.ks.labels]
        if table.ks.closed:
            ticks.append(float(table.ks.extras.get("total_arc", x[-1])))
            names.append(names[0])
        ax.set_xticks(ticks)
        ax.set_xticklabels(names)
        for t in ticks:
            ax.axvline(t, color="grey", linewidth=0.5)
    ax.set_xlabel("k")
    ax.set_ylabel("E")
    return _save(fig, path)


def plot_potential(path: Path, V: PotentialGrid, p: Optional[LatticeParams] = None) -> Path:
    """Heat map over the physical unit cell"""
    B = basis_from_params(p if p is not None else SQUARE)
    edges = np.arange(V.n + 1) / V.n
    Y1, Y2 = np.meshgrid(edges, edges, indexing="ij")
    X1 = B[0, 0] * Y1 + B[0, 1] * Y2
    X2 = B[1, 0] * Y1 + B[1, 1] * Y2
    fig, ax = plt.subplots(figsize=(5.5, 5))
    mesh = ax.pcolormesh(X1, X2, V.values, cmap="viridis", vmin=0.0, vmax=V.v_plus, shading="flat")
    fig.colorbar(mesh, ax=ax, label="V")
    ax.set_aspect("equal")
    return _save(fig, path)


def plot_potential_1d(
    path: Path, V: Union[StepPotential, PotentialGrid], ef: Optional[EdgeEigenfunctions] = None
) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    if isinstance(V, StepPotential):
        x = np.linspace(0.0, V.X, 2001)
        ax.step(x, V.value_at(x), where="post", color="black", label="V")
    else:
        ax.step(V.nodes(), V.values, where="post", color="black", label="V")
    ax.set_xlabel("x")
    ax.set_ylabel("V")
    if ef is not None:
        twin = ax.twinx()
        twin.plot(ef.x, ef.psi_alpha**2 / ef.alpha, label="psi_alpha^2/alpha")
        twin.plot(ef.x, ef.psi_beta**2 / ef.beta, label="psi_beta^2/beta")
        twin.legend(loc="upper right")
    return _save(fig, path)


def plot_contrast_sweeps(path: Path, sweeps: Dict[str, ContrastSweep]) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, sweep in sweeps.items():
        G = [np.nan if pt.G is None else pt.G for pt in sweep.points]
        ax.plot([pt.V_plus for pt in sweep.points], G, marker="o", label=label)
    ax.set_xlabel("V+")
    ax.set_ylabel("G*")
    ax.legend()
    return _save(fig, path)


def plot_lattice_sweep(path: Path, sweep: LatticeSweep) -> Path:
    fig, ax = plt.subplots(figsize=(5, 6))
    ok = [pt for pt in sweep.points if pt.G is not None]
    failed = [pt for pt in sweep.points if pt.G is None]
    sc = ax.scatter([pt.a for pt in ok], [pt.b for pt in ok], c=[pt.G for pt in ok], cmap="viridis", s=60)
    if failed:
        ax.scatter([pt.a for pt in failed], [pt.b for pt in failed], marker="x", color="red", label="failed")
        ax.legend()
    a = np.linspace(0.0, 0.5, 100)
    # Points below the unit circle lie outside the fundamental domain
    ax.fill_between(a, 0.0, np.sqrt(1.0 - a**2), color="lightgrey")
    if ok:
        fig.colorbar(sc, ax=ax, label="G*")
    ax.set_xlabel("a")
    ax.set_ylabel("b")
    ax.set_ylim(bottom=0.7)
    return _save(fig, path)

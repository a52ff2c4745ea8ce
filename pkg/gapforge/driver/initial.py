"""
Initial potentials for the rearrangement and SDP loops.
"""

import itertools
import math
from typing import List, Optional

import numpy as np
from scipy import ndimage

from gapforge.errors import InvalidParamsError
from gapforge.hill1d.steps import StepPotential
from gapforge.lattice.bravais import LatticeParams, basis_from_params
from gapforge.operators.potential import PotentialGrid
import logging

logger = logging.getLogger(__name__)

STRATEGIES = ("cosine", "random-bangbang", "disk-array")


def cosine_step(X: float, m: int, Vp: float) -> StepPotential:
    """V+ where cos(2 pi m x / X) > 0, zero elsewhere"""
    if m < 1:
        raise InvalidParamsError(f"Gap index must be positive, got {m}")
    cell = X / m
    bps, vals = [], []
    for j in range(m):
        bps += [(j - 0.25) * cell, (j + 0.25) * cell]
        vals += [Vp, 0.0]
    return StepPotential.canonical(X, bps, vals, Vp)


def cosine_grid_2d(n: int, m: int, Vp: float) -> PotentialGrid:
    y = np.arange(n) / n
    y1, y2 = np.meshgrid(y, y, indexing="ij")
    wells = np.cos(2 * math.pi * m * y1) + np.cos(2 * math.pi * y2) > 0
    return PotentialGrid(d=2, n=n, values=np.where(wells, 0.0, Vp), v_plus=Vp)


def random_bangbang(n: int, Vp: float, seed: int, d: int = 2) -> PotentialGrid:
    """Thresholded smooth random field; half the cell at V+"""
    rng = np.random.default_rng(seed)
    field = ndimage.gaussian_filter(rng.standard_normal((n,) * d), sigma=n / 8.0, mode="wrap")
    upper = field > np.median(field)
    return PotentialGrid(d=d, n=n, values=np.where(upper, Vp, 0.0), v_plus=Vp)


def _periodic_distance(diff: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Physical distance of fractional offsets (..., 2) to the nearest lattice image"""
    diff = diff - np.round(diff)
    best = None
    for s in itertools.product((-1, 0, 1), repeat=2):
        d = np.linalg.norm((diff + np.array(s, dtype=float)) @ B.T, axis=-1)
        best = d if best is None else np.minimum(best, d)
    return best


def disk_centers(m: int, p: LatticeParams) -> np.ndarray:
    """m fractional centers (i/m, i s/m mod 1) with s maximizing the closest approach"""
    B = basis_from_params(p)
    i = np.arange(m)
    best_centers, best_gap = None, -1.0
    for s in range(max(m, 1)):
        centers = np.column_stack([i / m, np.mod(i * s / m, 1.0)])
        if m == 1:
            return centers
        diff = centers[:, None, :] - centers[None, :, :]
        dist = _periodic_distance(diff, B)
        gap = float(dist[~np.eye(m, dtype=bool)].min())
        if gap > best_gap + 1e-12:
            best_centers, best_gap = centers, gap
    return best_centers


def disk_array(
    n: int, m: int, Vp: float, p: LatticeParams, radius: float = 0.2, radii: Optional[List[float]] = None
) -> PotentialGrid:
    """Zero on m disks of radius radius/sqrt(m) (or the given radii), V+ elsewhere"""
    B = basis_from_params(p)
    centers = disk_centers(m, p)
    if radii is None:
        radii = [radius / math.sqrt(m)] * m
    if len(radii) != m:
        raise InvalidParamsError(f"Need {m} radii, got {len(radii)}")
    y = np.arange(n) / n
    nodes = np.stack(np.meshgrid(y, y, indexing="ij"), axis=-1)
    wells = np.zeros((n, n), dtype=bool)
    for c, r in zip(centers, radii):
        wells |= _periodic_distance(nodes - c, B) < r
    return PotentialGrid(d=2, n=n, values=np.where(wells, 0.0, Vp), v_plus=Vp)


def init_potential(
    strategy: str, n: int, m: int, Vp: float, p: LatticeParams, seed: int = 0, radius: float = 0.2
) -> PotentialGrid:
    if strategy == "cosine":
        V = cosine_grid_2d(n, m, Vp)
    elif strategy == "random-bangbang":
        V = random_bangbang(n, Vp, seed)
    elif strategy == "disk-array":
        V = disk_array(n, m, Vp, p, radius)
    else:
        raise InvalidParamsError(f"Unknown initialization strategy '{strategy}'", strategy=strategy)
    logger.debug(f"Initial potential '{strategy}' (seed {seed}): {V.upper_mask().mean():.3f} of cell at V+")
    return V


def restart_plan(strategy: str, seed: int, restarts: int) -> List[tuple]:
    """(strategy, seed) per restart: the configured start, one disk array, then random fields"""
    plan = [(strategy, seed)]
    if restarts > 1 and strategy != "disk-array":
        plan.append(("disk-array", seed))
    r = 1
    while len(plan) < restarts:
        plan.append(("random-bangbang", seed + r))
        r += 1
    return plan[:restarts]

"""
Ex post facto checks on dispersion tables: k -> -k symmetry and whether the
gap edges over the full zone sit on the sampled IBZ boundary.
"""

from typing import Optional

import numpy as np
from pydantic import BaseModel

from gapforge.bands.dispersion import DispersionTable
from gapforge.errors import InvalidParamsError


class ExtremaCheck(BaseModel):
    on_boundary: bool
    alpha_full: float
    alpha_path: float
    beta_full: float
    beta_path: float
    offending_k: Optional[int] = None


def _match_index(points: np.ndarray, target: np.ndarray, tol: float) -> int:
    dist = np.linalg.norm(points - target[None, :], axis=1)
    i = int(np.argmin(dist))
    if dist[i] > tol:
        raise InvalidParamsError(f"Sampling is not closed under the requested map (missing {target})")
    return i


def symmetry_check(
    t: DispersionTable, rotation: Optional[np.ndarray] = None, tol: float = 1e-9
) -> float:
    """max |E_j(k) - E_j(Rk)| with R = -I unless a rotation is given"""
    pts = t.ks.points
    R = -np.eye(pts.shape[1]) if rotation is None else np.asarray(rotation, dtype=float)
    deviation = 0.0
    for i, k in enumerate(pts):
        j = _match_index(pts, R @ k, tol)
        deviation = max(deviation, float(np.max(np.abs(t.energies[:, i] - t.energies[:, j]))))
    return deviation


def extrema_location_check(
    full: DispersionTable, path: DispersionTable, m: int, tol: float = 1e-6
) -> ExtremaCheck:
    lower_full, upper_full = full.energies[m - 1], full.energies[m]
    alpha_full, beta_full = float(lower_full.max()), float(upper_full.min())
    alpha_path = float(path.energies[m - 1].max())
    beta_path = float(path.energies[m].min())

    offending = None
    if alpha_full > alpha_path + tol:
        offending = int(np.argmax(lower_full))
    elif beta_full < beta_path - tol:
        offending = int(np.argmin(upper_full))
    return ExtremaCheck(
        on_boundary=offending is None,
        alpha_full=alpha_full,
        alpha_path=alpha_path,
        beta_full=beta_full,
        beta_path=beta_path,
        offending_k=offending,
    )

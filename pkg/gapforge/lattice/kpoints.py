"""
Quasi-momentum samplings: IBZ boundary paths and half/full Brillouin-zone grids.
"""

import itertools
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from gapforge.errors import InvalidParamsError
from gapforge.lattice.bravais import (
    SQUARE,
    TRIANGULAR,
    LatticeParams,
    basis_from_params,
    reciprocal_basis,
)
import logging

logger = logging.getLogger(__name__)

_NEIGHBOR_SHIFTS = np.array(list(itertools.product(range(-2, 3), repeat=2)), dtype=float)


@dataclass(frozen=True, eq=False)
class KSampling:
    """Ordered quasi-momenta; rows of `points` are k vectors (1 or 2 components)"""

    points: np.ndarray
    labels: Tuple[Tuple[int, str], ...] = ()
    arc: Optional[np.ndarray] = None
    closed: bool = False
    kind: str = "list"
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.shape[0] == 0:
            raise InvalidParamsError("A k-point sampling must be nonempty")
        object.__setattr__(self, "points", pts)
        for idx, _ in self.labels:
            if not 0 <= idx < pts.shape[0]:
                raise InvalidParamsError(f"Label index {idx} outside the sampling")
        if self.arc is None:
            steps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
            object.__setattr__(self, "arc", np.concatenate([[0.0], np.cumsum(steps)]))

    def __len__(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def single_k(k) -> KSampling:
    return KSampling(points=np.atleast_2d(np.asarray(k, dtype=float)))


def _circumcenter(p: np.ndarray, q: np.ndarray, r: np.ndarray) -> np.ndarray:
    # Solve |x - p| = |x - q| = |x - r| as a 2x2 linear system
    A = 2.0 * np.array([q - p, r - p])
    rhs = np.array([q @ q - p @ p, r @ r - p @ p])
    return np.linalg.solve(A, rhs)


def ibz_vertices(kind: str, basis: Optional[np.ndarray] = None) -> List[Tuple[str, np.ndarray]]:
    """High-symmetry vertices of the irreducible zone, in path order"""
    if kind not in ("square", "triangular"):
        raise InvalidParamsError(f"No irreducible zone defined for lattice kind '{kind}'")
    if basis is None:
        basis = basis_from_params(SQUARE if kind == "square" else TRIANGULAR)
    G = reciprocal_basis(basis)
    g1, g2 = G[:, 0], G[:, 1]
    gamma = np.zeros(2)

    if kind == "square":
        X = 0.5 * g1
        M = _circumcenter(gamma, g1, g2)
        return [("Γ", gamma), ("X", X), ("M", M)]

    g_adj = g2 if g1 @ g2 > 0 else g1 + g2
    K = _circumcenter(gamma, g1, g_adj)
    M = 0.5 * g1
    return [("Γ", gamma), ("K", K), ("M", M)]


def ibz_boundary_path(
    kind: str, points_per_side: int, basis: Optional[np.ndarray] = None
) -> KSampling:
    """
    Uniform samples along the closed IBZ boundary.

    Each side contributes `points_per_side` points starting at its first
    vertex; the closing return to Γ is flagged by `closed` instead of being
    duplicated.
    """
    if points_per_side < 2:
        raise InvalidParamsError("points_per_side must be at least 2")
    vertices = ibz_vertices(kind, basis)
    corners = [v for _, v in vertices] + [vertices[0][1]]

    points = []
    labels = []
    arc = []
    s = 0.0
    for side in range(3):
        start, end = corners[side], corners[side + 1]
        length = float(np.linalg.norm(end - start))
        labels.append((len(points), vertices[side][0]))
        for j in range(points_per_side):
            t = j / points_per_side
            points.append(start + t * (end - start))
            arc.append(s + t * length)
        s += length

    return KSampling(
        points=np.array(points),
        labels=tuple(labels),
        arc=np.array(arc),
        closed=True,
        kind=f"ibz_{kind}",
        extras={"total_arc": s},
    )


def lattice_path(params: LatticeParams, points_per_side: int) -> KSampling:
    kind = params.kind
    if kind == "generic":
        raise InvalidParamsError(
            f"IBZ path sampling needs a square or triangular lattice, got (a={params.a}, b={params.b})"
        )
    return ibz_boundary_path(kind, points_per_side, basis_from_params(params))


def fold_to_zone(k: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Map k to the nearest-to-origin equivalent point modulo the reciprocal lattice"""
    candidates = k[None, :] - _NEIGHBOR_SHIFTS @ G.T
    return candidates[np.argmin(np.einsum("ij,ij->i", candidates, candidates))]


def in_closed_zone(k: np.ndarray, G: np.ndarray, tol: float = 1e-9) -> bool:
    shifts = _NEIGHBOR_SHIFTS @ G.T
    dist = np.linalg.norm(k[None, :] - shifts, axis=1)
    return bool(np.linalg.norm(k) <= dist.min() + tol)


def half_bz_grid(B: np.ndarray, resolution: int) -> KSampling:
    """
    Uniform r x r grid of the zone, one representative per {k, -k} pair.

    Grid nodes are the fractional points (i/r, j/r) of the reciprocal cell,
    anchored at Γ and folded into the Voronoi cell of the origin.
    Resolution one adds the boundary midpoint G1/2 next to Γ.
    """
    if resolution < 1:
        raise InvalidParamsError("resolution must be at least 1")
    r = resolution
    G = reciprocal_basis(B)
    points = []
    for i in range(r):
        for j in range(r):
            partner = ((-i) % r, (-j) % r)
            if (i, j) > partner:
                continue
            k = G @ np.array([i / r, j / r])
            points.append(fold_to_zone(k, G))
    if r == 1:
        points.append(fold_to_zone(0.5 * G[:, 0], G))
    labels = ((0, "Γ"),)
    return KSampling(points=np.array(points), labels=labels, kind="half_bz")


def full_bz_grid(B: np.ndarray, resolution: int) -> KSampling:
    """Half grid together with its literal negation (closed under k -> -k)"""
    half = half_bz_grid(B, resolution)
    points = [p for p in half.points]
    for p in half.points:
        q = -p
        if not any(np.allclose(q, existing, atol=1e-12) for existing in points):
            points.append(q)
    return KSampling(points=np.array(points), labels=half.labels, kind="full_bz")


def line_1d(X: float, count: int) -> KSampling:
    """Uniform samples of [-pi/X, pi/X], endpoints included"""
    if X <= 0 or count < 2:
        raise InvalidParamsError(f"1D sampling needs X > 0 and count >= 2, got X={X}, count={count}")
    k = np.linspace(-np.pi / X, np.pi / X, count)
    labels = [(0, "-π/X"), (count - 1, "π/X")]
    if count % 2:
        labels.insert(1, (count // 2, "0"))
    return KSampling(points=k[:, None], labels=tuple(labels), kind="line_1d")

"""
Finite-difference Bloch operators.

The 2D operator lives on the unit torus after the change of variables
x = B y. For u periodic on the torus it reads

    H(k) u = -div(N grad u) - 2i k_p . grad u + |k|^2 u + V u,

with N = (B^t B)^{-1} and k_p = B^{-1} k, discretized by a nine point
stencil (the mixed derivative uses the four diagonal neighbours).
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from gapforge.errors import DimensionMismatchError, InvalidParamsError, SingularBasisError
from gapforge.lattice.bravais import LatticeParams, basis_from_params
from gapforge.operators.potential import PotentialGrid
import logging

logger = logging.getLogger(__name__)

DENSE_LIMIT = 4096


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """Sparse Hermitian matrix plus the data it was assembled from"""

    matrix: sp.csr_matrix
    h: float
    k: Optional[np.ndarray] = None
    params: Optional[LatticeParams] = None
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def hermitian_defect(self) -> float:
        """max |H - H*| relative to max |H|"""
        diff = abs(self.matrix - self.matrix.conj().T)
        scale = abs(self.matrix).max()
        return float(diff.max() / scale) if scale > 0 else 0.0


def metric_from_basis(B: np.ndarray) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    det = float(np.linalg.det(B))
    if abs(det) < 1e-12:
        raise SingularBasisError(f"Basis is singular (det = {det:.3e})", det=det)
    N = np.linalg.inv(B.T @ B)
    return 0.5 * (N + N.T)


def _torus_offsets(N: np.ndarray, kp: np.ndarray, h: float) -> List[Tuple[int, int, complex]]:
    h2 = h * h
    n12 = N[0, 1] / (2.0 * h2)
    return [
        (1, 0, -N[0, 0] / h2 - 1j * kp[0] / h),
        (-1, 0, -N[0, 0] / h2 + 1j * kp[0] / h),
        (0, 1, -N[1, 1] / h2 - 1j * kp[1] / h),
        (0, -1, -N[1, 1] / h2 + 1j * kp[1] / h),
        (1, 1, -n12),
        (-1, -1, -n12),
        (1, -1, n12),
        (-1, 1, n12),
    ]


def assemble_bloch_2d(
    p: LatticeParams, k, V: PotentialGrid, n: Optional[int] = None
) -> HermitianOperator:
    if V.d != 2:
        raise DimensionMismatchError(f"2D operator needs a 2D potential, got d = {V.d}")
    n = V.n if n is None else n
    if n != V.n:
        raise DimensionMismatchError(f"Grid size {n} does not match potential size {V.n}")
    if n < 4:
        raise InvalidParamsError(f"Grid size must be at least 4, got {n}")
    k = np.asarray(k, dtype=float).reshape(2)

    B = basis_from_params(p)
    N = metric_from_basis(B)
    kp = np.linalg.solve(B, k)
    h = 1.0 / n

    i1, i2 = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    rows_base = (i1 * n + i2).ravel()
    rows, cols, vals = [rows_base], [rows_base], []
    center = 2.0 * (N[0, 0] + N[1, 1]) / h**2 + float(k @ k)
    vals.append(center + V.flat().astype(complex))

    for d1, d2, coef in _torus_offsets(N, kp, h):
        if coef == 0:
            continue
        nbr = (((i1 + d1) % n) * n + (i2 + d2) % n).ravel()
        rows.append(rows_base)
        cols.append(nbr)
        vals.append(np.full(rows_base.shape, coef, dtype=complex))

    H = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n * n, n * n),
    ).tocsr()
    return HermitianOperator(matrix=H, h=h, k=k, params=p, meta={"n": n, "d": 2})


def assemble_bloch_1d(X: float, k: float, V: PotentialGrid) -> HermitianOperator:
    """Three-point Bloch operator; the phase e^{ikX} sits on the wrap entries"""
    if V.d != 1:
        raise DimensionMismatchError(f"1D operator needs a 1D potential, got d = {V.d}")
    k = float(np.asarray(k, dtype=float).reshape(-1)[0])
    if abs(k) > np.pi / X + 1e-12:
        raise InvalidParamsError(f"Quasi-momentum {k} outside [-pi/X, pi/X]")
    n = V.n
    if n < 3:
        raise InvalidParamsError(f"1D grid needs at least 3 nodes, got {n}")
    h = X / n
    off = -np.ones(n - 1) / h**2
    H = sp.diags([off, 2.0 / h**2 + V.values, off], [-1, 0, 1], format="lil", dtype=complex)
    phase = np.exp(1j * k * X)
    H[n - 1, 0] = -phase / h**2
    H[0, n - 1] = -np.conj(phase) / h**2
    return HermitianOperator(matrix=H.tocsr(), h=h, k=np.array([k]), meta={"n": n, "d": 1, "X": X})


def _edge_weights(N: np.ndarray) -> List[Tuple[int, int, float]]:
    # N = (N11-|N12|) e1e1' + (N22-|N12|) e2e2' + |N12| (e1+s e2)(e1+s e2)'
    s = 1 if N[0, 1] >= 0 else -1
    c = abs(N[0, 1])
    return [(1, 0, N[0, 0] - c), (0, 1, N[1, 1] - c), (1, s, c)]


def assemble_laplacian_bc(n: int, bc: str, p: LatticeParams) -> HermitianOperator:
    """
    Metric-weighted Laplacian on the unit square with Dirichlet or Neumann
    conditions. Dirichlet unknowns are the (n-1)^2 interior vertices,
    Neumann unknowns the n^2 cell centres.
    """
    if n < 4:
        raise InvalidParamsError(f"Grid size must be at least 4, got {n}")
    if bc not in ("dirichlet", "neumann"):
        raise InvalidParamsError(f"Unknown boundary condition '{bc}'")
    N = metric_from_basis(basis_from_params(p))
    h = 1.0 / n
    m = n - 1 if bc == "dirichlet" else n
    i1, i2 = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    idx = (i1 * m + i2).ravel()

    rows, cols, vals = [], [], []
    diag = np.zeros(m * m)
    for d1, d2, w in _edge_weights(N):
        if w <= 0:
            continue
        w = w / h**2
        for sgn in (1, -1):
            j1, j2 = i1 + sgn * d1, i2 + sgn * d2
            inside = ((j1 >= 0) & (j1 < m) & (j2 >= 0) & (j2 < m)).ravel()
            if bc == "dirichlet":
                diag += w
            else:
                diag[inside] += w
            rows.append(idx[inside])
            cols.append((j1 * m + j2).ravel()[inside])
            vals.append(np.full(int(inside.sum()), -w))

    rows.append(idx)
    cols.append(idx)
    vals.append(diag)
    L = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(m * m, m * m),
    ).tocsr()
    return HermitianOperator(matrix=L, h=h, params=p, meta={"n": n, "bc": bc})

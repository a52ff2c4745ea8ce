"""
Dispersion tables E_j(k) and the gap edges read off them.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict

from gapforge.eigen.solver import smallest_eigenpairs
from gapforge.errors import InvalidParamsError, NoConvergenceError
from gapforge.lattice.bravais import LatticeParams, basis_from_params, reciprocal_basis
from gapforge.lattice.kpoints import KSampling
from gapforge.operators.potential import PotentialGrid
from gapforge.operators.stencil import HermitianOperator, assemble_bloch_1d, assemble_bloch_2d
import logging

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class DispersionTable:
    """energies[j, i] is band j+1 at ks.points[i]"""

    ks: KSampling
    energies: np.ndarray
    params: Optional[LatticeParams]
    n: int

    @property
    def bands(self) -> int:
        return self.energies.shape[0]


class GapReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    m: int
    alpha: float
    beta: float
    G: float
    argmax_k: int
    argmin_k: int

    @property
    def is_open(self) -> bool:
        return self.G > 0


def gap_ratio(alpha: float, beta: float) -> float:
    if beta <= alpha:
        return 0.0
    return float(min(2.0 * (beta - alpha) / (alpha + beta), 2.0))


def bloch_operator(V: PotentialGrid, p: Optional[LatticeParams], k) -> HermitianOperator:
    if V.d == 1:
        return assemble_bloch_1d(V.period, float(np.asarray(k).reshape(-1)[0]), V)
    if p is None:
        raise InvalidParamsError("A 2D dispersion needs lattice parameters")
    return assemble_bloch_2d(p, k, V)


def _solve_all(V, p, ks: KSampling, count: int, tol: float, threads: Optional[int], want_vectors: bool):
    def one(i: int):
        H = bloch_operator(V, p, ks.points[i])
        try:
            pairs = smallest_eigenpairs(H, count, tol=tol)
        except NoConvergenceError as e:
            raise NoConvergenceError(
                f"Eigensolve failed at k index {i}: {e.message}", residual=e.residual, k_index=i
            )
        logger.debug(f"k[{i}] = {ks.points[i]}: lowest energy {pairs.values[0]:.6g}")
        return (pairs, H) if want_vectors else (pairs.values, None)

    if threads is not None and threads > 1 and len(ks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, range(len(ks))))
    return [one(i) for i in range(len(ks))]


def dispersion(
    V: PotentialGrid,
    p: Optional[LatticeParams],
    ks: KSampling,
    J: int,
    tol: float = 1e-9,
    threads: Optional[int] = None,
) -> DispersionTable:
    if J < 2:
        raise InvalidParamsError(f"Band count must be at least 2, got {J}")
    results = _solve_all(V, p, ks, J, tol, threads, want_vectors=False)
    energies = np.column_stack([values for values, _ in results])
    return DispersionTable(ks=ks, energies=energies, params=p, n=V.n)


def eigenpairs_over_k(
    V: PotentialGrid,
    p: Optional[LatticeParams],
    ks: KSampling,
    count: int,
    tol: float = 1e-9,
    threads: Optional[int] = None,
) -> List[Tuple]:
    """(EigenPairs, operator) per k point, for subspace construction"""
    return _solve_all(V, p, ks, count, tol, threads, want_vectors=True)


def gap_report(t: DispersionTable, m: int) -> GapReport:
    if m < 1 or m + 1 > t.bands:
        raise InvalidParamsError(f"Gap index {m} needs at least {m + 1} bands, table has {t.bands}")
    lower = t.energies[m - 1]
    upper = t.energies[m]
    i_max = int(np.argmax(lower))
    i_min = int(np.argmin(upper))
    alpha, beta = float(lower[i_max]), float(upper[i_min])
    return GapReport(
        m=m, alpha=alpha, beta=beta, G=gap_ratio(alpha, beta), argmax_k=i_max, argmin_k=i_min
    )


def free_bands(
    ks: KSampling, J: int, p: Optional[LatticeParams] = None, X: float = 1.0, shells: int = 6
) -> np.ndarray:
    """Exact bands |k + g|^2 of the zero potential, shape (J, len(ks))"""
    if ks.dim == 1:
        g = 2.0 * np.pi * np.arange(-shells, shells + 1)[:, None] / X
    else:
        if p is None:
            raise InvalidParamsError("Free 2D bands need lattice parameters")
        G = reciprocal_basis(basis_from_params(p))
        r = np.arange(-shells, shells + 1)
        c = np.array(np.meshgrid(r, r, indexing="ij")).reshape(2, -1)
        g = (G @ c).T
    shifted = ks.points[:, None, :] + g[None, :, :]
    energies = np.sort(np.einsum("kgd,kgd->kg", shifted, shifted), axis=1)[:, :J]
    return energies.T

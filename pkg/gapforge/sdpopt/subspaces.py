"""
Low-dimensional spectral subspaces at each sampled quasi-momentum.
"""

from dataclasses import dataclass
from typing import List, Optional

import numpy as np
import scipy.sparse as sp

from gapforge.bands.dispersion import eigenpairs_over_k
from gapforge.errors import InvalidParamsError
from gapforge.lattice.bravais import LatticeParams
from gapforge.lattice.kpoints import KSampling
from gapforge.operators.potential import PotentialGrid
from gapforge.utils.metrics import track_performance
import logging

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SubspaceBundle:
    """
    U_alpha[j] holds the m lowest eigenvectors of L_j + diag(V) and U_beta[j]
    the next mu, both with orthonormal columns. L_j is the kinetic part only.
    """

    V: PotentialGrid
    params: Optional[LatticeParams]
    ks: KSampling
    m: int
    mu: int
    L: List[sp.csr_matrix]
    U_alpha: List[np.ndarray]
    U_beta: List[np.ndarray]
    energies: np.ndarray

    @property
    def q(self) -> int:
        return len(self.L)

    @property
    def alpha(self) -> float:
        """Largest m-th eigenvalue over the sampled k"""
        return float(self.energies[self.m - 1].max())

    @property
    def beta(self) -> float:
        return float(self.energies[self.m].min())

    def kinetic_blocks(self):
        """(U_a* L U_a, U_b* L U_b) per k"""
        out = []
        for L, Ua, Ub in zip(self.L, self.U_alpha, self.U_beta):
            out.append((Ua.conj().T @ (L @ Ua), Ub.conj().T @ (L @ Ub)))
        return out

    def orthonormality_defect(self) -> float:
        worst = 0.0
        for Ua, Ub in zip(self.U_alpha, self.U_beta):
            U = np.hstack([Ua, Ub])
            worst = max(worst, float(np.abs(U.conj().T @ U - np.eye(U.shape[1])).max()))
        return worst


@track_performance("build_subspaces")
def build_subspaces(
    V: PotentialGrid,
    p: Optional[LatticeParams],
    ks: KSampling,
    m: int,
    mu: int,
    tol: float = 1e-9,
    threads: Optional[int] = None,
) -> SubspaceBundle:
    if m < 1 or mu < 1:
        raise InvalidParamsError(f"Subspace sizes must be positive, got m={m}, mu={mu}")
    if m + mu > V.size:
        raise InvalidParamsError(f"Grid with {V.size} unknowns cannot hold {m + mu} eigenvectors")

    results = eigenpairs_over_k(V, p, ks, m + mu, tol=tol, threads=threads)
    potential = sp.diags(V.flat())
    L, Ua, Ub, energies = [], [], [], []
    for pairs, H in results:
        L.append((H.matrix - potential).tocsr())
        Ua.append(pairs.vectors[:, :m])
        Ub.append(pairs.vectors[:, m : m + mu])
        energies.append(pairs.values)

    bundle = SubspaceBundle(
        V=V, params=p, ks=ks, m=m, mu=mu, L=L, U_alpha=Ua, U_beta=Ub,
        energies=np.column_stack(energies),
    )
    logger.debug(
        f"Subspaces for m={m}, mu={mu} at {len(ks)} k points: "
        f"alpha={bundle.alpha:.6g}, beta={bundle.beta:.6g}"
    )
    return bundle

"""
Closed-form bounds and limits for the gap-to-midgap ratio.
"""

import math
from functools import lru_cache
from typing import List, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy.optimize import brentq
from scipy.special import jv

from gapforge.eigen.solver import smallest_eigenpairs
from gapforge.errors import InvalidParamsError
from gapforge.lattice.bravais import LatticeParams
from gapforge.operators.stencil import assemble_laplacian_bc
import logging

logger = logging.getLogger(__name__)

RATIO_MAX = 2.0


def ratio_gap(x: float) -> float:
    """f(x) = 2(x - 1)/(x + 1): the ratio G for edges with beta/alpha = x"""
    return 2.0 * (x - 1.0) / (x + 1.0)


def upper_bound_1d(m: int, X: float, Vp: float) -> float:
    if m < 1 or X <= 0 or Vp < 0:
        raise InvalidParamsError(f"Invalid 1D bound arguments m={m}, X={X}, Vp={Vp}")
    return 2.0 * X**2 * Vp / (2.0 * math.pi**2 * m**2 + X**2 * Vp)


class LaplaceBounds(BaseModel):
    model_config = ConfigDict(frozen=True)

    lambda_D: List[float]
    lambda_N: List[float]


@lru_cache(maxsize=64)
def _laplace_spectrum(a: float, b: float, n: int, bc: str, count: int) -> tuple:
    L = assemble_laplacian_bc(n, bc, LatticeParams(a=a, b=b))
    return tuple(float(v) for v in smallest_eigenpairs(L, count).values)


def laplace_bounds(p: LatticeParams, n: int, count: int) -> LaplaceBounds:
    return LaplaceBounds(
        lambda_D=list(_laplace_spectrum(p.a, p.b, n, "dirichlet", count)),
        lambda_N=list(_laplace_spectrum(p.a, p.b, n, "neumann", count)),
    )


def upper_bound_2d(m: int, p: LatticeParams, Vp: float, n: int = 32) -> float:
    """(l^D_{m+1} + V+ - l^N_m)/(l^N_{m+1} + V+ + l^N_m), clamped to 2"""
    if m < 1:
        raise InvalidParamsError(f"Gap index must be positive, got {m}")
    if (n - 1) ** 2 < m + 1:
        raise InvalidParamsError(f"Grid size {n} cannot resolve {m + 1} Laplace eigenvalues")
    lb = laplace_bounds(p, n, m + 1)
    lD, lN = lb.lambda_D, lb.lambda_N
    value = (lD[m] + Vp - lN[m - 1]) / (lN[m] + Vp + lN[m - 1])
    if value > RATIO_MAX:
        logger.debug(f"2D bound {value:.4f} clamped to {RATIO_MAX}")
    return float(min(value, RATIO_MAX))


class BesselZeroTable(BaseModel):
    """First positive zeros j_{1,l} of J_l for l = 0, 1, 2"""

    model_config = ConfigDict(frozen=True)

    j01: float = 2.4048
    j11: float = 3.8317
    j21: float = 5.1356

    def polished(self) -> "BesselZeroTable":
        def polish(order: int, seed: float) -> float:
            return brentq(lambda x: jv(order, x), seed - 0.05, seed + 0.05, xtol=1e-15, rtol=4e-16)

        return BesselZeroTable(j01=polish(0, self.j01), j11=polish(1, self.j11), j21=polish(2, self.j21))

    def residuals(self) -> List[float]:
        return [abs(float(jv(0, self.j01))), abs(float(jv(1, self.j11))), abs(float(jv(2, self.j21)))]


@lru_cache(maxsize=1)
def default_bessel_zeros() -> BesselZeroTable:
    return BesselZeroTable().polished()


def high_contrast_g(table: BesselZeroTable = None) -> float:
    t = table if table is not None else default_bessel_zeros()
    return ratio_gap(t.j11**2 / t.j01**2)


def disk_union_gap(radii: Sequence[float], table: BesselZeroTable = None) -> float:
    """High-contrast ratio for m zero-disks: f(j11^2 R_min^2 / (j01^2 R_max^2))"""
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0 or np.any(radii <= 0):
        raise InvalidParamsError("Disk radii must be positive")
    t = table if table is not None else default_bessel_zeros()
    x = (t.j11**2 * radii.min() ** 2) / (t.j01**2 * radii.max() ** 2)
    return max(ratio_gap(x), 0.0)

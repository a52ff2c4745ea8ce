"""
Unit-volume two-dimensional Bravais lattices.

Every unit-volume lattice is isometric to one generated by the columns of

    B_{a,b} = [[1/sqrt(b), a/sqrt(b)], [0, sqrt(b)]]

with (a, b) in the fundamental domain U = {0 <= a <= 1/2, b > 0, a^2 + b^2 >= 1}.
"""

import math
from typing import Any, Dict, Union

import numpy as np
from pydantic import BaseModel, ConfigDict

from gapforge.errors import InvalidParamsError, SingularBasisError
import logging

logger = logging.getLogger(__name__)

DOMAIN_TOL = 1e-9
SINGULAR_TOL = 1e-12
MAX_REDUCTION_STEPS = 64


class LatticeParams(BaseModel):
    """Point (a, b) of the lattice fundamental domain"""

    model_config = ConfigDict(frozen=True)

    a: float
    b: float

    def in_domain(self, tol: float = DOMAIN_TOL) -> bool:
        return (
            self.b > 0
            and -tol <= self.a <= 0.5 + tol
            and self.a * self.a + self.b * self.b >= 1.0 - tol
        )

    @property
    def kind(self) -> str:
        """'square', 'triangular' or 'generic'"""
        if abs(self.a) < DOMAIN_TOL and abs(self.b - 1.0) < DOMAIN_TOL:
            return "square"
        if abs(self.a - 0.5) < DOMAIN_TOL and abs(self.b - math.sqrt(3) / 2) < DOMAIN_TOL:
            return "triangular"
        return "generic"


SQUARE = LatticeParams(a=0.0, b=1.0)
TRIANGULAR = LatticeParams(a=0.5, b=math.sqrt(3) / 2)

NAMED_LATTICES: Dict[str, LatticeParams] = {
    "square": SQUARE,
    "triangular": TRIANGULAR,
}


def parse_lattice(spec: Union[str, Dict[str, Any], LatticeParams]) -> LatticeParams:
    """Accept "square", "triangular", {"a": .., "b": ..} or LatticeParams"""
    if isinstance(spec, LatticeParams):
        params = spec
    elif isinstance(spec, str):
        if spec not in NAMED_LATTICES:
            raise InvalidParamsError(f"Unknown lattice name: {spec}", lattice=spec)
        params = NAMED_LATTICES[spec]
    else:
        try:
            params = LatticeParams(a=float(spec["a"]), b=float(spec["b"]))
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidParamsError(f"Malformed lattice parameters {spec}: {e}")
    if not params.in_domain():
        raise InvalidParamsError(
            f"Lattice parameters (a={params.a}, b={params.b}) lie outside the fundamental domain",
            a=params.a,
            b=params.b,
        )
    return params


def basis_from_params(p: LatticeParams) -> np.ndarray:
    if not p.in_domain():
        raise InvalidParamsError(
            f"Lattice parameters (a={p.a}, b={p.b}) lie outside the fundamental domain",
            a=p.a,
            b=p.b,
        )
    sb = math.sqrt(p.b)
    return np.array([[1.0 / sb, p.a / sb], [0.0, sb]])


def _checked_det(B: np.ndarray) -> float:
    B = np.asarray(B, dtype=float)
    if B.shape != (2, 2):
        raise SingularBasisError(f"Expected a 2x2 basis, got shape {B.shape}")
    det = float(np.linalg.det(B))
    if abs(det) < SINGULAR_TOL:
        raise SingularBasisError(f"Basis is singular (det = {det:.3e})", det=det)
    return det


def reduce_to_fundamental(B: np.ndarray) -> LatticeParams:
    """Gauss-reduce the columns of B and read off (a, b) in U"""
    det = _checked_det(B)
    M = np.asarray(B, dtype=float) / math.sqrt(abs(det))
    u, v = M[:, 0].copy(), M[:, 1].copy()

    for _ in range(MAX_REDUCTION_STEPS):
        if v @ v < u @ u:
            u, v = v, u
        mu = round(float(u @ v) / float(u @ u))
        if mu == 0:
            break
        v = v - mu * u
    else:
        logger.warning("Gauss reduction hit its step limit")

    if v @ v < u @ u:
        u, v = v, u
    if u @ v < 0:
        v = -v

    uu = float(u @ u)
    a = min(max(float(u @ v) / uu, 0.0), 0.5)
    b = 1.0 / uu
    # |u| = |v| admits the same (a, b) either way round; a = 1/2 is already minimal
    return LatticeParams(a=a, b=b)


def reciprocal_basis(B: np.ndarray) -> np.ndarray:
    _checked_det(B)
    return 2.0 * math.pi * np.linalg.inv(np.asarray(B, dtype=float)).T

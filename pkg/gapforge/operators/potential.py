"""
Sampled periodic potentials on the unit torus (2D) or on [0, X) (1D).
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from gapforge.errors import DimensionMismatchError, InvalidParamsError

BOX_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class PotentialGrid:
    """
    Potential values at the nodes x_l = l*h, h = period/n.

    `values` has shape (n,) for d = 1 and (n, n) for d = 2; axis i of a 2D
    grid runs along the i-th lattice coordinate. `period` is the 1D cell
    length and is fixed to 1 for the unit torus.
    """

    d: int
    n: int
    values: np.ndarray
    v_plus: float
    period: float = 1.0

    def __post_init__(self):
        if self.d not in (1, 2):
            raise InvalidParamsError(f"Potential dimension must be 1 or 2, got {self.d}")
        values = np.array(self.values, dtype=float)
        expected = (self.n,) * self.d
        if values.shape != expected:
            raise DimensionMismatchError(
                f"Potential grid has shape {values.shape}, expected {expected}"
            )
        if self.v_plus < 0:
            raise InvalidParamsError(f"V_plus must be nonnegative, got {self.v_plus}")
        slack = BOX_TOL * max(1.0, self.v_plus)
        if values.min() < -slack or values.max() > self.v_plus + slack:
            raise InvalidParamsError(
                f"Potential values [{values.min():.6g}, {values.max():.6g}] leave the box [0, {self.v_plus}]"
            )
        values = np.clip(values, 0.0, self.v_plus)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def h(self) -> float:
        return self.period / self.n

    @property
    def size(self) -> int:
        return self.n**self.d

    def flat(self) -> np.ndarray:
        return self.values.reshape(-1)

    def with_values(self, values: np.ndarray) -> "PotentialGrid":
        return PotentialGrid(
            d=self.d,
            n=self.n,
            values=np.asarray(values, dtype=float).reshape(self.values.shape),
            v_plus=self.v_plus,
            period=self.period,
        )

    def nodes(self) -> np.ndarray:
        """Node coordinates: shape (n,) in 1D, (n, n, 2) lattice coordinates in 2D"""
        x = np.arange(self.n) * self.h
        if self.d == 1:
            return x
        return np.stack(np.meshgrid(x, x, indexing="ij"), axis=-1)

    def upper_mask(self, tol: float = 1e-6) -> np.ndarray:
        return self.values >= self.v_plus * (1.0 - tol)

    @classmethod
    def constant(
        cls, d: int, n: int, value: float, v_plus: float, period: float = 1.0
    ) -> "PotentialGrid":
        return cls(d=d, n=n, values=np.full((n,) * d, float(value)), v_plus=v_plus, period=period)

    @classmethod
    def from_mask(
        cls, mask: np.ndarray, v_plus: float, period: float = 1.0, d: Optional[int] = None
    ) -> "PotentialGrid":
        """Bang-bang potential equal to V_plus where `mask` is true"""
        mask = np.asarray(mask, dtype=bool)
        d = d or mask.ndim
        return cls(
            d=d,
            n=mask.shape[0],
            values=np.where(mask, v_plus, 0.0),
            v_plus=v_plus,
            period=period,
        )

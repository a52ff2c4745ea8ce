"""
Piecewise-constant periodic potentials on [0, X).
"""

from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from gapforge.errors import InvalidParamsError
from gapforge.operators.potential import PotentialGrid

MERGE_TOL = 1e-14


class StepPotential(BaseModel):
    """
    Value values[i] on [breakpoints[i], breakpoints[i+1]); the last interval
    wraps around to breakpoints[0] + X. Canonical form: adjacent values
    differ, cyclically.
    """

    model_config = ConfigDict(frozen=True)

    X: float
    breakpoints: List[float]
    values: List[float]
    V_plus: float

    @model_validator(mode="after")
    def _canonical(self) -> "StepPotential":
        if self.X <= 0:
            raise ValueError(f"period must be positive, got {self.X}")
        if len(self.breakpoints) == 0 or len(self.breakpoints) != len(self.values):
            raise ValueError("breakpoints and values must be nonempty and of equal length")
        bp = np.asarray(self.breakpoints)
        if bp[0] < 0 or bp[-1] >= self.X or np.any(np.diff(bp) <= 0):
            raise ValueError("breakpoints must be strictly ascending in [0, X)")
        slack = 1e-12 * max(1.0, self.V_plus)
        if min(self.values) < -slack or max(self.values) > self.V_plus + slack:
            raise ValueError(f"values must lie in [0, {self.V_plus}]")
        if len(self.values) > 1:
            cyclic = list(self.values) + [self.values[0]]
            if any(cyclic[i] == cyclic[i + 1] for i in range(len(self.values))):
                raise ValueError("adjacent values must differ (canonical form)")
        return self

    @classmethod
    def canonical(
        cls, X: float, breakpoints: Sequence[float], values: Sequence[float], V_plus: float
    ) -> "StepPotential":
        """Sort, drop empty intervals and merge equal neighbours"""
        if len(breakpoints) == 0:
            raise InvalidParamsError("A step potential needs at least one interval")
        pairs = sorted(zip((float(b) % X for b in breakpoints), (float(v) for v in values)))
        merged: List[Tuple[float, float]] = []
        for i, (b, v) in enumerate(pairs):
            nxt = pairs[i + 1][0] if i + 1 < len(pairs) else pairs[0][0] + X
            if nxt - b <= MERGE_TOL * X:
                continue
            if merged and merged[-1][1] == v:
                continue
            merged.append((b, v))
        if not merged:
            merged = [pairs[0]]
        if len(merged) > 1 and merged[0][1] == merged[-1][1]:
            merged = merged[1:]
        if len(merged) == 1:
            merged = [(0.0, merged[0][1])]
        vals = [min(max(v, 0.0), V_plus) for _, v in merged]
        return cls(X=X, breakpoints=[b for b, _ in merged], values=vals, V_plus=V_plus)

    @classmethod
    def constant(cls, X: float, value: float, V_plus: float) -> "StepPotential":
        return cls(X=X, breakpoints=[0.0], values=[float(value)], V_plus=V_plus)

    @classmethod
    def barrier(cls, X: float, b: float, V_plus: float, start: float = 0.0) -> "StepPotential":
        """V_plus on [start, start + b), zero on the rest of the period"""
        if not 0 <= b <= X:
            raise InvalidParamsError(f"Barrier length {b} outside [0, {X}]")
        if b <= MERGE_TOL * X:
            return cls.constant(X, 0.0, V_plus)
        if b >= X * (1 - MERGE_TOL):
            return cls.constant(X, V_plus, V_plus)
        return cls.canonical(X, [start, start + b], [V_plus, 0.0], V_plus)

    def intervals(self) -> List[Tuple[float, float, float]]:
        """(start, length, value) covering [breakpoints[0], breakpoints[0] + X)"""
        bp = list(self.breakpoints) + [self.breakpoints[0] + self.X]
        return [(bp[i], bp[i + 1] - bp[i], self.values[i]) for i in range(len(self.values))]

    def value_at(self, x) -> np.ndarray:
        t = np.mod(np.asarray(x, dtype=float), self.X)
        idx = np.searchsorted(np.asarray(self.breakpoints), t, side="right") - 1
        return np.asarray(self.values)[idx]

    def upper_measure(self) -> float:
        return float(sum(L for _, L, v in self.intervals() if v == self.V_plus))

    def barrier_fraction(self) -> float:
        return self.upper_measure() / self.X

    def is_bang_bang(self) -> bool:
        return all(v in (0.0, self.V_plus) for v in self.values)

    def transitions(self) -> int:
        return 0 if len(self.values) == 1 else len(self.values)

    def to_grid(self, n: int) -> PotentialGrid:
        x = np.arange(n) * self.X / n
        return PotentialGrid(d=1, n=n, values=self.value_at(x), v_plus=self.V_plus, period=self.X)

    def shifted(self, s: float) -> "StepPotential":
        return StepPotential.canonical(
            self.X, [b + s for b in self.breakpoints], self.values, self.V_plus
        )


def periodic_extension(V: StepPotential, m: int) -> StepPotential:
    """V compressed into [0, X/m) and repeated m times over the same period X"""
    if m < 1:
        raise InvalidParamsError(f"Repetition count must be positive, got {m}")
    cell = V.X / m
    bps, vals = [], []
    for r in range(m):
        bps.extend(r * cell + b / m for b in V.breakpoints)
        vals.extend(V.values)
    return StepPotential.canonical(V.X, bps, vals, V.V_plus)


def scaled_contrast(V: StepPotential, factor: float) -> StepPotential:
    """Multiply values and V_plus by factor"""
    return StepPotential(
        X=V.X,
        breakpoints=list(V.breakpoints),
        values=[v * factor for v in V.values],
        V_plus=V.V_plus * factor,
    )


def symmetric_difference(V: StepPotential, W: StepPotential) -> float:
    """Lebesgue measure of {V = V+} symmetric-difference {W = V+}"""
    if abs(V.X - W.X) > 1e-12:
        raise InvalidParamsError("Potentials must share the period")
    cuts = np.unique(np.concatenate([[0.0, V.X], V.breakpoints, W.breakpoints]))
    mids = 0.5 * (cuts[:-1] + cuts[1:])
    lengths = np.diff(cuts)
    differ = (V.value_at(mids) == V.V_plus) != (W.value_at(mids) == W.V_plus)
    return float(lengths[differ].sum())

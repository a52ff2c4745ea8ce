"""
Connected components of the low-potential set on the periodic grid.
"""

import math
from typing import List, Optional

import numpy as np
from pydantic import BaseModel
from scipy import ndimage

from gapforge.errors import InvalidParamsError
from gapforge.lattice.bravais import LatticeParams, SQUARE, basis_from_params
from gapforge.operators.potential import PotentialGrid

# Index-space directions for the perimeter estimate
_DIRECTIONS = ((1, 0), (0, 1), (1, 1), (1, -1))


class ComponentReport(BaseModel):
    count: int
    areas: List[float]
    perimeters: List[float]
    roundness: List[float]


def _find(parent: dict, x: int) -> int:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def periodic_labels(mask: np.ndarray) -> np.ndarray:
    """4-connected labels 0..count with components glued across the cell edges"""
    labels, count = ndimage.label(mask)
    parent = {i: i for i in range(count + 1)}
    for a, b in ((labels[0, :], labels[-1, :]), (labels[:, 0], labels[:, -1])):
        for x, y in zip(a, b):
            if x and y:
                rx, ry = _find(parent, int(x)), _find(parent, int(y))
                if rx != ry:
                    parent[max(rx, ry)] = min(rx, ry)
    roots = sorted({_find(parent, i) for i in range(1, count + 1)})
    relabel = np.zeros(count + 1, dtype=int)
    for i in range(1, count + 1):
        relabel[i] = roots.index(_find(parent, i)) + 1
    return relabel[labels]


def component_analysis(
    V: PotentialGrid, level: Optional[float] = None, p: Optional[LatticeParams] = None
) -> ComponentReport:
    if V.d != 2:
        raise InvalidParamsError("Component analysis needs a 2D potential")
    level = 0.5 * V.v_plus if level is None else level
    if not 0 < level < V.v_plus:
        raise InvalidParamsError(f"Level {level} must lie strictly between 0 and {V.v_plus}")
    B = basis_from_params(p if p is not None else SQUARE)
    n = V.n
    node_area = abs(np.linalg.det(B)) / n**2

    labels = periodic_labels(V.values < level)
    count = int(labels.max())
    areas, perimeters, roundness = [], [], []
    for c in range(1, count + 1):
        inside = labels == c
        area = float(inside.sum()) * node_area
        # Cauchy-Crofton: average crossings over four line families
        total = 0.0
        for d in _DIRECTIONS:
            step = np.linalg.norm(B @ np.array(d, dtype=float)) / n
            crossings = np.count_nonzero(inside != np.roll(inside, shift=(-d[0], -d[1]), axis=(0, 1)))
            total += crossings * node_area / step
        perimeter = math.pi / 8.0 * total
        areas.append(area)
        perimeters.append(perimeter)
        roundness.append(4 * math.pi * area / perimeter**2 if perimeter > 0 else 0.0)
    return ComponentReport(count=count, areas=areas, perimeters=perimeters, roundness=roundness)

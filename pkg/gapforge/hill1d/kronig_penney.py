"""
Transfer-matrix discriminants and their level crossings.

For a step potential the monodromy over one period is a product of interval
propagators [[C, S], [x S, C]] with x = v - E. The band edges of gap m are
the m-th and (m+1)-th roots of D(E) = (-1)^m, counted with multiplicity.
"""

import math
from typing import Callable, List, Tuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from gapforge.errors import DegenerateInputError, InvalidParamsError, RootBracketingError
from gapforge.hill1d.steps import StepPotential
import logging

logger = logging.getLogger(__name__)

SERIES_TOL = 1e-6
DOUBLE_ROOT_TOL = 1e-10
MAX_GROWTH = 20
HUGE = 1e300

Discriminant = Callable[[np.ndarray], np.ndarray]


def interval_propagator(x, L) -> Tuple[np.ndarray, np.ndarray]:
    """C and S for -psi'' + x psi = 0 across length L, broadcast elementwise"""
    x, L = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(L, dtype=float))
    z = x * L * L
    C = np.empty_like(z)
    S = np.empty_like(z)
    small = np.abs(z) < SERIES_TOL
    pos = (x > 0) & ~small
    neg = (x < 0) & ~small
    with np.errstate(over="ignore"):
        q = np.sqrt(x[pos])
        C[pos] = np.cosh(q * L[pos])
        S[pos] = np.sinh(q * L[pos]) / q
    w = np.sqrt(-x[neg])
    C[neg] = np.cos(w * L[neg])
    S[neg] = np.sin(w * L[neg]) / w
    zs, Ls = z[small], L[small]
    C[small] = 1.0 + zs / 2.0 + zs**2 / 24.0
    S[small] = Ls * (1.0 + zs / 6.0 + zs**2 / 120.0)
    return C, S


def _finite(values: np.ndarray) -> np.ndarray:
    return np.nan_to_num(values, nan=HUGE, posinf=HUGE, neginf=-HUGE)


def _kp_half_trace(E: np.ndarray, b: float, X: float, Vp: float) -> np.ndarray:
    a = X - b
    xa = -E
    xb = Vp - E
    Ca, Sa = interval_propagator(xa, a)
    mid = 0.5 * (xa + xb)
    D = np.empty_like(E)

    # cosh(Qb) factored out so high barriers do not overflow before cancelling
    big = (xb > 0) & (xb * b * b >= SERIES_TOL)
    Q = np.sqrt(xb[big])
    with np.errstate(over="ignore"):
        D[big] = np.cosh(Q * b) * (Ca[big] + mid[big] * Sa[big] * np.tanh(Q * b) / Q)
    rest = ~big
    Cb, Sb = interval_propagator(xb[rest], b)
    D[rest] = Ca[rest] * Cb + mid[rest] * Sa[rest] * Sb
    return _finite(D)


def kp_discriminant(E, b: float, X: float, Vp: float):
    """Half-trace of the monodromy for V+ on a barrier of length b, zero elsewhere"""
    if X <= 0 or Vp < 0:
        raise InvalidParamsError(f"Invalid Kronig-Penney parameters X={X}, Vp={Vp}")
    if not 0 <= b <= X:
        raise DegenerateInputError(f"Barrier length {b} outside [0, {X}]", b=b)
    E_arr = np.atleast_1d(np.asarray(E, dtype=float))
    if np.any(E_arr < 0):
        raise DegenerateInputError("Discriminant requested at negative energy", energy=float(E_arr.min()))
    D = _kp_half_trace(E_arr, b, X, Vp)
    return float(D[0]) if np.ndim(E) == 0 else D


def monodromy(V: StepPotential, E: np.ndarray) -> np.ndarray:
    """Stacked 2x2 monodromy matrices over one period starting at breakpoints[0]"""
    E = np.atleast_1d(np.asarray(E, dtype=float))
    M = np.broadcast_to(np.eye(2), (E.size, 2, 2)).copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for _, L, v in V.intervals():
            x = v - E
            C, S = interval_propagator(x, L)
            T = np.stack([np.stack([C, S], axis=-1), np.stack([x * S, C], axis=-1)], axis=-2)
            M = T @ M
    return M


def step_discriminant(V: StepPotential, E) -> np.ndarray:
    M = monodromy(V, E)
    return _finite(0.5 * (M[:, 0, 0] + M[:, 1, 1]))


def _scan_step(X: float, Vp: float) -> float:
    free = (math.pi / X) ** 2
    return max(min(1.0, Vp / 50.0, free / 10.0), 1e-3 * free)


def _roots_below(disc: Discriminant, level: float, e_max: float, step: float) -> List[float]:
    def g(e: float) -> float:
        return float(disc(np.array([e]))[0]) - level

    E = np.arange(0.0, e_max + step, step)
    f = disc(E) - level
    roots: List[float] = []

    for i in np.nonzero(f[:-1] * f[1:] < 0)[0]:
        roots.append(brentq(g, E[i], E[i + 1], xtol=1e-13, rtol=4 * np.finfo(float).eps))

    for i in np.nonzero(f == 0)[0]:
        if 0 < i < len(f) - 1 and f[i - 1] * f[i + 1] > 0:
            roots.extend([float(E[i])] * 2)
        else:
            roots.append(float(E[i]))

    # Tangencies and pairs of roots closer than the scan step
    inner = np.arange(1, len(f) - 1)
    same = (f[inner - 1] * f[inner] > 0) & (f[inner] * f[inner + 1] > 0)
    dip = (np.abs(f[inner]) <= np.abs(f[inner - 1])) & (np.abs(f[inner]) <= np.abs(f[inner + 1]))
    for i in inner[same & dip]:
        sign = np.sign(f[i])
        res = minimize_scalar(
            lambda e: sign * g(e), bounds=(E[i - 1], E[i + 1]), method="bounded",
            options={"xatol": 1e-13},
        )
        e0, f0 = float(res.x), sign * float(res.fun)
        if abs(f0) < DOUBLE_ROOT_TOL:
            roots.extend([e0, e0])
        elif np.sign(f0) != sign:
            roots.append(brentq(g, E[i - 1], e0, xtol=1e-13))
            roots.append(brentq(g, e0, E[i + 1], xtol=1e-13))
    return sorted(roots)


def level_roots(disc: Discriminant, level: float, count: int, X: float, Vp: float) -> List[float]:
    """First `count` roots of disc(E) = level on E >= 0, with multiplicity"""
    if count < 1:
        raise InvalidParamsError(f"Root count must be positive, got {count}")
    step = _scan_step(X, Vp)
    e_max = 1.5 * ((count + 1) * math.pi / X) ** 2 + 1.0
    for _ in range(MAX_GROWTH):
        roots = _roots_below(disc, level, e_max, step)
        if len(roots) >= count:
            return roots[:count]
        e_max *= 2.0
    raise RootBracketingError(
        f"Found only {len(roots)} of {count} roots of D(E) = {level} below E = {e_max:.3g}",
        found=len(roots),
    )


def kp_gap_edges(b: float, X: float, Vp: float, m: int) -> Tuple[float, float]:
    if m < 1:
        raise InvalidParamsError(f"Gap index must be positive, got {m}")
    if not 0 <= b <= X:
        raise DegenerateInputError(f"Barrier length {b} outside [0, {X}]", b=b)
    level = -1.0 if m % 2 else 1.0
    roots = level_roots(lambda E: _kp_half_trace(E, b, X, Vp), level, m + 1, X, Vp)
    return roots[m - 1], roots[m]


def step_gap_edges(V: StepPotential, m: int) -> Tuple[float, float]:
    if m < 1:
        raise InvalidParamsError(f"Gap index must be positive, got {m}")
    level = -1.0 if m % 2 else 1.0
    roots = level_roots(lambda E: step_discriminant(V, E), level, m + 1, V.X, V.V_plus)
    return roots[m - 1], roots[m]


def transfer_matrix_spectrum(V: StepPotential, k: float, count: int) -> np.ndarray:
    """Lowest `count` Bloch eigenvalues at quasi-momentum k"""
    if abs(k) > math.pi / V.X + 1e-12:
        raise InvalidParamsError(f"Quasi-momentum {k} outside the Brillouin zone")
    level = math.cos(k * V.X)
    return np.asarray(level_roots(lambda E: step_discriminant(V, E), level, count, V.X, V.V_plus))

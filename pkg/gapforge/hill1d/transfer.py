"""
Analytic Bloch solutions of step potentials at the gap edges.

Solutions are stored as their (psi, psi') state at every breakpoint and
evaluated exactly inside each interval with the constant-potential
propagator, so sampled values carry no discretisation error.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from gapforge.errors import InvalidParamsError
from gapforge.hill1d.kronig_penney import interval_propagator, monodromy, step_gap_edges
from gapforge.hill1d.steps import StepPotential
import logging

logger = logging.getLogger(__name__)

DEFAULT_SAMPLES = 2048
GAUSS_NODES = 64
NULL_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class BlochSolution:
    """Real solution with psi(x + X) = rho * psi(x), normalized in L2 over one period"""

    potential: StepPotential
    energy: float
    rho: float
    offsets: np.ndarray
    lengths: np.ndarray
    shifts: np.ndarray
    states: np.ndarray
    scale: float = 1.0

    def evaluate(self, x) -> Tuple[np.ndarray, np.ndarray]:
        V = self.potential
        t = np.asarray(x, dtype=float) - V.breakpoints[0]
        wraps = np.floor(t / V.X)
        t = t - wraps * V.X
        sign = np.where(np.mod(wraps, 2) == 0, 1.0, self.rho)
        idx = np.clip(np.searchsorted(self.offsets, t, side="right") - 1, 0, len(self.offsets) - 1)
        C, S = interval_propagator(self.shifts[idx], t - self.offsets[idx])
        y0, y1 = self.states[idx, 0], self.states[idx, 1]
        psi = C * y0 + S * y1
        dpsi = self.shifts[idx] * S * y0 + C * y1
        factor = sign * self.scale
        return factor * psi, factor * dpsi

    def normalized(self) -> "BlochSolution":
        nodes, weights = np.polynomial.legendre.leggauss(GAUSS_NODES)
        total = 0.0
        for start, L in zip(self.offsets, self.lengths):
            x = self.potential.breakpoints[0] + start + 0.5 * L * (nodes + 1.0)
            psi, _ = self.evaluate(x)
            total += 0.5 * L * float(np.dot(weights, psi**2))
        return BlochSolution(
            potential=self.potential,
            energy=self.energy,
            rho=self.rho,
            offsets=self.offsets,
            lengths=self.lengths,
            shifts=self.shifts,
            states=self.states,
            scale=self.scale / np.sqrt(total),
        )


def bloch_solution(V: StepPotential, E: float, initial: np.ndarray, rho: float) -> BlochSolution:
    ivals = V.intervals()
    lengths = np.array([L for _, L, _ in ivals])
    offsets = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    shifts = np.array([v - E for _, _, v in ivals])
    states = np.empty((len(ivals), 2))
    y = np.asarray(initial, dtype=float)
    for i, (L, x) in enumerate(zip(lengths, shifts)):
        states[i] = y
        C, S = interval_propagator(x, L)
        y = np.array([C * y[0] + S * y[1], x * S * y[0] + C * y[1]])
    sol = BlochSolution(
        potential=V, energy=E, rho=rho, offsets=offsets, lengths=lengths, shifts=shifts, states=states
    )
    return sol.normalized()


def _null_vectors(M: np.ndarray, rho: float):
    """Initial states v with M v = rho v; two of them when M = rho I"""
    A = M - rho * np.eye(2)
    scale = max(1.0, float(np.abs(M).max()))
    v1 = np.array([A[0, 1], -A[0, 0]])
    v2 = np.array([A[1, 1], -A[1, 0]])
    best = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
    if np.linalg.norm(best) < NULL_TOL * scale:
        return [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    return [best / np.linalg.norm(best)]


@dataclass(frozen=True, eq=False)
class EdgeEigenfunctions:
    x: np.ndarray
    psi_alpha: np.ndarray
    psi_beta: np.ndarray
    dpsi_alpha: np.ndarray
    dpsi_beta: np.ndarray
    alpha: float
    beta: float
    periodic: bool
    sol_alpha: BlochSolution
    sol_beta: BlochSolution

    @property
    def wronskian(self) -> np.ndarray:
        return self.psi_beta * self.dpsi_alpha - self.psi_alpha * self.dpsi_beta


def count_zeros(sol: BlochSolution, samples: int = 4 * DEFAULT_SAMPLES) -> int:
    """Sign changes of psi over one period, including the wrap-around"""
    X = sol.potential.X
    psi, _ = sol.evaluate(np.arange(samples + 1) * X / samples)
    s = np.sign(psi)
    s = s[s != 0]
    return int(np.count_nonzero(s[:-1] != s[1:]))


def edge_eigenfunctions(V: StepPotential, m: int, samples: int = DEFAULT_SAMPLES) -> EdgeEigenfunctions:
    if samples < 16:
        raise InvalidParamsError(f"Need at least 16 samples, got {samples}")
    alpha, beta = step_gap_edges(V, m)
    periodic = m % 2 == 0
    rho = 1.0 if periodic else -1.0

    Ma = monodromy(V, np.array([alpha]))[0]
    Mb = monodromy(V, np.array([beta]))[0]
    va, vb = _null_vectors(Ma, rho), _null_vectors(Mb, rho)
    if len(va) > 1 or len(vb) > 1:
        # Closed gap: both edges share a two-dimensional eigenspace
        logger.warning(f"Gap {m} is closed at E = {alpha:.6g}; returning an orthogonal pair")
        pair = va if len(va) > 1 else vb
        sa = bloch_solution(V, alpha, pair[0], rho)
        sb = bloch_solution(V, beta, pair[1], rho)
        sb = _orthogonalize(sb, sa)
    else:
        sa = bloch_solution(V, alpha, va[0], rho)
        sb = bloch_solution(V, beta, vb[0], rho)

    x = np.arange(samples) * V.X / samples
    pa, dpa = sa.evaluate(x)
    pb, dpb = sb.evaluate(x)
    return EdgeEigenfunctions(
        x=x, psi_alpha=pa, psi_beta=pb, dpsi_alpha=dpa, dpsi_beta=dpb,
        alpha=alpha, beta=beta, periodic=periodic, sol_alpha=sa, sol_beta=sb,
    )


def _orthogonalize(sb: BlochSolution, sa: BlochSolution) -> BlochSolution:
    nodes, weights = np.polynomial.legendre.leggauss(GAUSS_NODES)
    overlap = 0.0
    for start, L in zip(sa.offsets, sa.lengths):
        x = sa.potential.breakpoints[0] + start + 0.5 * L * (nodes + 1.0)
        overlap += 0.5 * L * float(np.dot(weights, sa.evaluate(x)[0] * sb.evaluate(x)[0]))
    states = sb.states * sb.scale - overlap * sa.states * sa.scale
    raw = BlochSolution(
        potential=sb.potential, energy=sb.energy, rho=sb.rho, offsets=sb.offsets,
        lengths=sb.lengths, shifts=sb.shifts, states=states,
    )
    return raw.normalized()

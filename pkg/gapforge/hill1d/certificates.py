"""
Optimality certificates and closed-form checks for the 1D gap problem.
"""

import math
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel
from scipy.optimize import brentq, minimize_scalar

from gapforge.bands.bounds import ratio_gap, upper_bound_1d
from gapforge.bands.dispersion import gap_ratio
from gapforge.errors import InvalidParamsError
from gapforge.hill1d.kronig_penney import kp_gap_edges, step_gap_edges
from gapforge.hill1d.rearrange import EMPTY_GAP_TOL, rearrange_step_1d
from gapforge.hill1d.steps import StepPotential, symmetric_difference
from gapforge.hill1d.transfer import BlochSolution, edge_eigenfunctions
import logging

logger = logging.getLogger(__name__)

COVANISH_TOL = 1e-4


class Certificate1D(BaseModel):
    m: int
    applicable: bool
    reason: Optional[str] = None
    alpha: float
    beta: float
    G: float
    bang_bang: bool = False
    bang_bang_fraction: float = 0.0
    transitions: int = 0
    transitions_ok: bool = False
    sign_violation_max: float = 0.0
    sign_violation_measure: float = 0.0
    signs_ok: bool = False
    covanishing_residual: float = 0.0
    covanishing_ok: bool = False
    periodicity_residual: float = 0.0
    wronskian_monotone: bool = False
    upper_bound: float = 0.0
    below_upper_bound: bool = False

    @property
    def passes(self) -> bool:
        return (
            self.applicable
            and self.bang_bang
            and self.transitions_ok
            and self.signs_ok
            and self.covanishing_ok
            and self.below_upper_bound
        )


def _zeros(sol: BlochSolution, x: np.ndarray) -> np.ndarray:
    psi, _ = sol.evaluate(x)
    step = x[1] - x[0]
    found = []
    for i in np.nonzero(psi[:-1] * psi[1:] < 0)[0]:
        found.append(brentq(lambda s: float(sol.evaluate(s)[0]), x[i], x[i] + step, xtol=1e-14))
    found.extend(x[np.nonzero(psi == 0)[0]])
    return np.asarray(found)


def _covanishing(sa: BlochSolution, sb: BlochSolution, x: np.ndarray) -> float:
    """Largest relative |psi_b'| at zeros of psi_a, and vice versa"""
    residual = 0.0
    for zero_of, deriv_of in ((sa, sb), (sb, sa)):
        z = _zeros(zero_of, x)
        if z.size == 0:
            continue
        scale = float(np.max(np.abs(deriv_of.evaluate(x)[1])))
        residual = max(residual, float(np.max(np.abs(deriv_of.evaluate(z)[1]))) / scale)
    return residual


def _wronskian_monotone(ef, tol: float) -> bool:
    dW = np.diff(ef.wronskian)
    # W' = (beta - alpha) psi_alpha psi_beta
    prod = ef.psi_alpha * ef.psi_beta
    drive = prod[:-1] + prod[1:]
    scale = max(float(np.max(np.abs(dW))), np.finfo(float).tiny)
    bad = dW * np.sign(drive) < -tol * scale
    return not bool(np.any(bad & (np.abs(drive) > tol * np.max(np.abs(drive)))))


def verify_1d_certificates(V: StepPotential, m: int, tol: float = 1e-6) -> Certificate1D:
    if m < 1:
        raise InvalidParamsError(f"Gap index must be positive, got {m}")
    alpha, beta = step_gap_edges(V, m)
    G = gap_ratio(alpha, beta)
    bound = upper_bound_1d(m, V.X, V.V_plus)
    if beta - alpha <= EMPTY_GAP_TOL * (alpha + beta):
        logger.info(f"Certificate for gap {m} not applicable: gap is empty")
        return Certificate1D(
            m=m, applicable=False, reason="gap is empty", alpha=alpha, beta=beta, G=0.0,
            upper_bound=bound, below_upper_bound=True,
        )

    ef = edge_eigenfunctions(V, m)
    phi = ef.psi_alpha**2 / alpha - ef.psi_beta**2 / beta
    upper = V.value_at(ef.x) == V.V_plus
    scale = float(np.max(np.abs(phi)))
    violation = np.where(upper, phi, -phi)
    violation_max = max(float(np.max(violation)), 0.0) / scale
    violation_measure = symmetric_difference(V, rearrange_step_1d(V, m))

    bb_measure = sum(L for _, L, v in V.intervals() if v in (0.0, V.V_plus))
    periodicity = symmetric_difference(V, V.shifted(V.X / m)) / V.X
    covanishing = _covanishing(ef.sol_alpha, ef.sol_beta, np.arange(4097) * V.X / 4096)

    cert = Certificate1D(
        m=m,
        applicable=True,
        alpha=alpha,
        beta=beta,
        G=G,
        bang_bang=V.is_bang_bang(),
        bang_bang_fraction=bb_measure / V.X,
        transitions=V.transitions(),
        transitions_ok=V.transitions() == 2 * m,
        sign_violation_max=violation_max,
        sign_violation_measure=violation_measure,
        signs_ok=violation_measure <= 10 * tol * V.X,
        covanishing_residual=covanishing,
        covanishing_ok=covanishing < COVANISH_TOL,
        periodicity_residual=periodicity,
        wronskian_monotone=_wronskian_monotone(ef, 1e-8),
        upper_bound=bound,
        below_upper_bound=G <= bound + 1e-9,
    )
    logger.info(
        f"1D certificate m={m}: G={G:.6f}, transitions={cert.transitions}, "
        f"sign violation measure={violation_measure:.2e}, passes={cert.passes}"
    )
    return cert


def kp_gap_ratio(b: float, X: float, Vp: float, m: int = 1) -> float:
    alpha, beta = kp_gap_edges(b, X, Vp, m)
    return gap_ratio(alpha, beta)


def optimal_b_search(X: float, Vp: float, xatol: float = 1e-8) -> Tuple[float, float]:
    """
    Barrier length b* maximizing G_1 for a single barrier of height Vp.

    Uses bounded Brent minimization (golden-section steps with parabolic
    interpolation) on [0, X] rather than pure golden-section search.
    """
    if Vp <= 0 or X <= 0:
        raise InvalidParamsError(f"optimal_b_search needs X > 0 and Vp > 0, got X={X}, Vp={Vp}")
    res = minimize_scalar(
        lambda b: -kp_gap_ratio(b, X, Vp), bounds=(0.0, X), method="bounded", options={"xatol": xatol}
    )
    b_star = float(res.x)
    G_star = -float(res.fun)
    logger.info(f"optimal_b_search X={X}, Vp={Vp}: b* = {b_star:.8f}, G* = {G_star:.8f}")
    return b_star, G_star


def dirichlet_union_spectrum(lengths: Sequence[float], count: int) -> np.ndarray:
    """Lowest `count` values of the union of (pi j / L)^2 over the intervals"""
    lengths = np.asarray(lengths, dtype=float)
    if lengths.size == 0 or np.any(lengths <= 0):
        raise InvalidParamsError("Interval lengths must be positive")
    j = np.arange(1, count + 1)
    values = ((math.pi * j[None, :]) / lengths[:, None]) ** 2
    return np.sort(values.ravel())[:count]


def equal_interval_high_contrast(m: int, lengths: Optional[Sequence[float]] = None) -> float:
    """
    High-contrast limit of G_m for m wells separated by infinite barriers.

    The spectrum is the union of the wells' Dirichlet spectra, so equal wells
    give beta/alpha = 4 and G = 6/5; unequal wells give strictly less.
    """
    if m < 1:
        raise InvalidParamsError(f"Gap index must be positive, got {m}")
    if lengths is None:
        lengths = [1.0 / m] * m
    if len(lengths) != m:
        raise InvalidParamsError(f"Need {m} interval lengths, got {len(lengths)}")
    spectrum = dirichlet_union_spectrum(lengths, m + 1)
    return gap_ratio(float(spectrum[m - 1]), float(spectrum[m]))


def high_contrast_limit_1d() -> float:
    return ratio_gap(4.0)

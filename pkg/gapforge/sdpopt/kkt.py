"""
KKT residuals of the fractional gap SDP and the weak bang-bang check.
"""

from typing import Optional

import numpy as np
from pydantic import BaseModel

from gapforge.errors import DimensionMismatchError
from gapforge.operators.potential import PotentialGrid
from gapforge.sdpopt.solver import DualCertificate, SDPSolution
from gapforge.sdpopt.subspaces import SubspaceBundle
import logging

logger = logging.getLogger(__name__)


class KKTReport(BaseModel):
    r1: float
    r2: float
    r3: float
    cs_alpha: float
    cs_beta: float
    cs_upper: float
    cs_lower: float
    primal_lower_violation: float
    primal_upper_violation: float
    box_violation: float
    dual_psd_violation: float
    dual_box_violation: float

    def max_residual(self) -> float:
        return max(self.model_dump().values())

    def passes(self, tol: float) -> bool:
        return self.max_residual() <= tol


def required_traces(alpha: float, beta: float):
    """Trace sums the multipliers must carry: (4 beta, 4 alpha)/(alpha + beta)^2"""
    s = (alpha + beta) ** 2
    return 4.0 * beta / s, 4.0 * alpha / s


def _diag_part(U: np.ndarray, M: np.ndarray) -> np.ndarray:
    return np.real(np.einsum("la,ab,lb->l", U, M, U.conj()))


def _hermitian_eigs(M: np.ndarray) -> np.ndarray:
    return np.linalg.eigvalsh(0.5 * (M + M.conj().T))


def kkt_report(sol: SDPSolution, cert: DualCertificate, bundle: SubspaceBundle) -> KKTReport:
    if len(cert.A) != bundle.q or len(cert.B) != bundle.q:
        raise DimensionMismatchError(f"Certificate has {len(cert.A)} blocks, bundle has {bundle.q}")
    V = sol.V.flat()
    if V.shape != cert.f_plus.shape or V.shape != cert.f_minus.shape:
        raise DimensionMismatchError("Multiplier vectors do not match the potential grid")
    alpha, beta, Vp = sol.alpha, sol.beta, sol.V.v_plus

    need_A, need_B = required_traces(alpha, beta)
    r1 = abs(sum(float(np.trace(A).real) for A in cert.A) - need_A)
    r2 = abs(sum(float(np.trace(B).real) for B in cert.B) - need_B)

    drive = np.zeros_like(V)
    cs_alpha = cs_beta = 0.0
    lower_violation = upper_violation = 0.0
    dual_psd = 0.0
    for L, Ua, Ub, A, B in zip(bundle.L, bundle.U_alpha, bundle.U_beta, cert.A, cert.B):
        drive += _diag_part(Ub, B) - _diag_part(Ua, A)
        CA = Ua.conj().T @ (L @ Ua) + Ua.conj().T @ (V[:, None] * Ua)
        CB = Ub.conj().T @ (L @ Ub) + Ub.conj().T @ (V[:, None] * Ub)
        slack_A = alpha * np.eye(bundle.m) - CA
        slack_B = CB - beta * np.eye(bundle.mu)
        cs_alpha = max(cs_alpha, abs(float(np.trace(A @ slack_A).real)))
        cs_beta = max(cs_beta, abs(float(np.trace(B @ slack_B).real)))
        lower_violation = max(lower_violation, -float(_hermitian_eigs(slack_A).min()))
        upper_violation = max(upper_violation, -float(_hermitian_eigs(slack_B).min()))
        dual_psd = max(dual_psd, -float(_hermitian_eigs(A).min()), -float(_hermitian_eigs(B).min()))

    r3 = float(np.max(np.abs(drive - (cert.f_plus - cert.f_minus))))
    report = KKTReport(
        r1=r1,
        r2=r2,
        r3=r3,
        cs_alpha=cs_alpha,
        cs_beta=cs_beta,
        cs_upper=float(np.max(np.abs(cert.f_plus * (Vp - V)))),
        cs_lower=float(np.max(np.abs(cert.f_minus * V))),
        primal_lower_violation=max(lower_violation, 0.0),
        primal_upper_violation=max(upper_violation, 0.0),
        box_violation=max(float(-V.min()), float(V.max() - Vp), 0.0),
        dual_psd_violation=max(dual_psd, 0.0),
        dual_box_violation=max(float(-cert.f_plus.min()), float(-cert.f_minus.min()), 0.0),
    )
    logger.debug(f"KKT residuals: max {report.max_residual():.3e} (r1={r1:.2e}, r2={r2:.2e}, r3={r3:.2e})")
    return report


class BangBangCheck(BaseModel):
    weakly_bang_bang: bool
    witness: Optional[int] = None
    interior_fraction: float


def weakly_bang_bang_check(V: PotentialGrid, tol: float = 1e-6) -> BangBangCheck:
    """True iff some grid value sits at 0 or V+ within tol * V+"""
    flat = V.flat()
    slack = tol * max(V.v_plus, np.finfo(float).tiny)
    at_bound = (flat <= slack) | (flat >= V.v_plus - slack)
    hits = np.nonzero(at_bound)[0]
    interior = 1.0 - hits.size / flat.size
    if interior > 0.01:
        logger.info(f"Potential has {100 * interior:.2f}% strictly interior values")
    return BangBangCheck(
        weakly_bang_bang=hits.size > 0,
        witness=int(hits[0]) if hits.size else None,
        interior_fraction=interior,
    )

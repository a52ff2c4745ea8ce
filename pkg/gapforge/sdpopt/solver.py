"""
Subspace-restricted gap SDP.

The fractional problem

    maximize (beta - alpha)/(alpha + beta)
    s.t.  U_a*(L_j + diag V)U_a <= alpha I,  U_b*(L_j + diag V)U_b >= beta I,
          0 <= V <= V+

is homogenized with theta = 2/(alpha + beta) into a linear SDP in
(theta, alpha~, beta~, V~) whose objective beta~ - alpha~ equals the gap
ratio G. Hermitian blocks are realified as [[Re, -Im], [Im, Re]].
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import cvxpy as cp
import numpy as np

from gapforge.errors import InvalidParamsError, SolverStallError
from gapforge.operators.potential import PotentialGrid
from gapforge.sdpopt.subspaces import SubspaceBundle
from gapforge.utils.metrics import track_performance
import logging

logger = logging.getLogger(__name__)

SOLVERS = ("clarabel", "scs")


@dataclass(frozen=True, eq=False)
class SDPSolution:
    alpha: float
    beta: float
    V: PotentialGrid
    theta: float
    G: float
    status: str
    solver: str
    incumbent_G: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "alpha": self.alpha,
            "beta": self.beta,
            "theta": self.theta,
            "G": self.G,
            "status": self.status,
            "solver": self.solver,
            "incumbent_G": self.incumbent_G,
        }


@dataclass(frozen=True, eq=False)
class DualCertificate:
    """Duals of the fractional problem: A_j, B_j Hermitian PSD, f_plus/f_minus >= 0"""

    A: List[np.ndarray]
    B: List[np.ndarray]
    f_plus: np.ndarray
    f_minus: np.ndarray
    extras: Dict[str, Any] = field(default_factory=dict)


def realify(M: np.ndarray) -> np.ndarray:
    return np.block([[M.real, -M.imag], [M.imag, M.real]])


def complexify(Z: np.ndarray) -> np.ndarray:
    """Hermitian A with tr(Z realify(X)) = Re tr(A X) for Hermitian X"""
    p = Z.shape[0] // 2
    Z11, Z12, Z21, Z22 = Z[:p, :p], Z[:p, p:], Z[p:, :p], Z[p:, p:]
    A = (Z11 + Z22) + 1j * (Z21 - Z12)
    return 0.5 * (A + A.conj().T)


def diagonal_map(U: np.ndarray) -> np.ndarray:
    """Matrix W with reshape(W @ v) = realify(U* diag(v) U), shape (4p^2, N)"""
    P = np.einsum("la,lb->lab", U.conj(), U)
    R = np.concatenate(
        [np.concatenate([P.real, -P.imag], axis=2), np.concatenate([P.imag, P.real], axis=2)], axis=1
    )
    return R.reshape(U.shape[0], -1).T


def _solve(problem: cp.Problem, solver: str, tol: float):
    if solver == "clarabel":
        problem.solve(
            solver=cp.CLARABEL, tol_gap_abs=tol * 1e-2, tol_gap_rel=tol * 1e-2, tol_feas=tol * 1e-2,
            max_iter=500,
        )
    elif solver == "scs":
        problem.solve(solver=cp.SCS, eps_abs=tol, eps_rel=tol, max_iters=200000)
    else:
        raise InvalidParamsError(f"Unknown SDP solver '{solver}', expected one of {SOLVERS}")


@track_performance("solve_gap_sdp")
def solve_gap_sdp(
    bundle: SubspaceBundle, Vp: float, tol: float = 1e-7, solver: str = "clarabel"
) -> Tuple[SDPSolution, DualCertificate]:
    if Vp <= 0:
        raise InvalidParamsError(f"V_plus must be positive, got {Vp}")
    if abs(Vp - bundle.V.v_plus) > 1e-12 * max(1.0, Vp):
        raise InvalidParamsError(f"Bundle was built for V_plus = {bundle.V.v_plus}, got {Vp}")

    m, mu, N = bundle.m, bundle.mu, bundle.V.size
    incumbent_alpha, incumbent_beta = bundle.alpha, bundle.beta
    incumbent_G = max(0.0, 2.0 * (incumbent_beta - incumbent_alpha) / (incumbent_alpha + incumbent_beta))

    theta = cp.Variable(nonneg=True)
    a_t = cp.Variable()
    b_t = cp.Variable()
    V_t = cp.Variable(N)

    constraints = [a_t + b_t == 2]
    lower_psd, upper_psd = [], []
    for (cA, cB), Ua, Ub in zip(bundle.kinetic_blocks(), bundle.U_alpha, bundle.U_beta):
        SA = cp.Variable((2 * m, 2 * m), symmetric=True)
        SB = cp.Variable((2 * mu, 2 * mu), symmetric=True)
        DA = cp.reshape(diagonal_map(Ua) @ V_t, (2 * m, 2 * m), order="C")
        DB = cp.reshape(diagonal_map(Ub) @ V_t, (2 * mu, 2 * mu), order="C")
        constraints += [
            SA == a_t * np.eye(2 * m) - theta * realify(cA) - DA,
            SB == theta * realify(cB) + DB - b_t * np.eye(2 * mu),
        ]
        lower_psd.append(SA >> 0)
        upper_psd.append(SB >> 0)
    box_lower = V_t >= 0
    box_upper = V_t <= theta * Vp
    constraints += lower_psd + upper_psd + [box_lower, box_upper]

    problem = cp.Problem(cp.Maximize(b_t - a_t), constraints)
    best = {"alpha": incumbent_alpha, "beta": incumbent_beta, "G": incumbent_G}
    try:
        _solve(problem, solver, tol)
    except cp.error.SolverError as e:
        logger.error(f"SDP backend {solver} failed: {e}")
        raise SolverStallError(f"SDP backend {solver} failed: {e}", best=best, solver=solver)

    status = problem.status
    if status == cp.OPTIMAL_INACCURATE:
        logger.warning(f"SDP backend {solver} returned an inaccurate optimum")
    elif status != cp.OPTIMAL:
        raise SolverStallError(f"SDP backend {solver} ended with status {status}", best=best, solver=solver)
    th = float(theta.value)
    if not th > 0:
        raise SolverStallError(f"Homogenization scale collapsed (theta = {th})", best=best, solver=solver)

    G = float(b_t.value - a_t.value)
    if G < incumbent_G - 10 * tol:
        logger.warning(f"SDP objective {G:.8f} below incumbent {incumbent_G:.8f}")
    V = bundle.V.with_values(np.clip(V_t.value / th, 0.0, Vp))
    sol = SDPSolution(
        alpha=float(a_t.value) / th,
        beta=float(b_t.value) / th,
        V=V,
        theta=th,
        G=G,
        status=status,
        solver=solver,
        incumbent_G=incumbent_G,
    )

    cert = DualCertificate(
        A=[th * complexify(c.dual_value) for c in lower_psd],
        B=[th * complexify(c.dual_value) for c in upper_psd],
        f_plus=th * np.asarray(box_upper.dual_value, dtype=float),
        f_minus=th * np.asarray(box_lower.dual_value, dtype=float),
        extras={"solve_time": problem.solver_stats.solve_time if problem.solver_stats else None},
    )
    logger.info(
        f"SDP ({solver}, q={bundle.q}, m={m}, mu={mu}, N={N}): G {incumbent_G:.6f} -> {G:.6f}"
    )
    return sol, cert

"""
Outer loop for the 2D gap problem: subspaces, SDP, repeat.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from gapforge.bands.bounds import high_contrast_g, upper_bound_2d
from gapforge.bands.dispersion import gap_ratio
from gapforge.driver.config import OptimizeConfig
from gapforge.driver.initial import init_potential, restart_plan
from gapforge.errors import SolverStallError
from gapforge.lattice.bravais import LatticeParams, basis_from_params
from gapforge.lattice.kpoints import KSampling, half_bz_grid, lattice_path
from gapforge.operators.potential import PotentialGrid
from gapforge.sdpopt.kkt import BangBangCheck, KKTReport, kkt_report, weakly_bang_bang_check
from gapforge.sdpopt.subspaces import build_subspaces
from gapforge.sdpopt.solver import solve_gap_sdp
from gapforge.utils.metrics import track_performance
import logging

logger = logging.getLogger(__name__)

CALM_ITERATIONS = 3


def build_sampling(cfg: OptimizeConfig, p: Optional[LatticeParams] = None) -> KSampling:
    p = p if p is not None else cfg.params
    if cfg.kpoints.kind == "ibz_path":
        return lattice_path(p, cfg.kpoints.points_per_side)
    return half_bz_grid(basis_from_params(p), cfg.kpoints.resolution)


@dataclass
class OuterIterate:
    iteration: int
    V: PotentialGrid
    alpha: float
    beta: float
    G: float
    G_sdp: Optional[float] = None
    dV: Optional[float] = None
    kkt: Optional[KKTReport] = None
    bang_bang: Optional[BangBangCheck] = None

    def to_record(self) -> Dict[str, Any]:
        return {
            "iteration": self.iteration,
            "alpha": self.alpha,
            "beta": self.beta,
            "G": self.G,
            "G_sdp": self.G_sdp,
            "dV": self.dV,
            "kkt_max_residual": self.kkt.max_residual() if self.kkt else None,
            "kkt": self.kkt.model_dump() if self.kkt else None,
            "weakly_bang_bang": self.bang_bang.weakly_bang_bang if self.bang_bang else None,
            "interior_fraction": self.bang_bang.interior_fraction if self.bang_bang else None,
        }


@dataclass
class OptimizeTrace:
    m: int
    V_plus: float
    params: LatticeParams
    strategy: str
    seed: int
    iterates: List[OuterIterate] = field(default_factory=list)
    status: str = "budget"
    error: Optional[Dict[str, Any]] = None

    @property
    def final(self) -> OuterIterate:
        return self.iterates[-1]

    @property
    def best(self) -> OuterIterate:
        return max(self.iterates, key=lambda it: it.G)

    def to_records(self) -> List[Dict[str, Any]]:
        return [it.to_record() for it in self.iterates]

    def summary(self) -> Dict[str, Any]:
        best = self.best
        return {
            "m": self.m,
            "V_plus": self.V_plus,
            "lattice": {"a": self.params.a, "b": self.params.b},
            "strategy": self.strategy,
            "seed": self.seed,
            "status": self.status,
            "iterations": len(self.iterates) - 1,
            "best_iteration": best.iteration,
            "G": best.G,
            "alpha": best.alpha,
            "beta": best.beta,
            "error": self.error,
        }


def _iterate_from(bundle, iteration: int, V: PotentialGrid, **extra) -> OuterIterate:
    alpha, beta = bundle.alpha, bundle.beta
    return OuterIterate(iteration=iteration, V=V, alpha=alpha, beta=beta, G=gap_ratio(alpha, beta), **extra)


@track_performance("optimize_2d")
def optimize_2d(
    cfg: OptimizeConfig,
    init: Optional[PotentialGrid] = None,
    strategy: Optional[str] = None,
    seed: Optional[int] = None,
) -> OptimizeTrace:
    """
    Alternate subspace construction and the gap SDP from one starting potential.

    Stops when the potential stops changing (max |dV| < eps_v V+) or when G
    moves less than eps_g for three consecutive iterations. A solver stall
    ends the run with status 'stalled' and is re-raised with the trace
    attached.
    """
    p = cfg.params
    strategy = strategy or cfg.init
    seed = cfg.seed if seed is None else seed
    ks = build_sampling(cfg, p)
    V = init if init is not None else init_potential(strategy, cfg.n, cfg.m, cfg.V_plus, p, seed, cfg.disk_radius)

    trace = OptimizeTrace(m=cfg.m, V_plus=cfg.V_plus, params=p, strategy=strategy, seed=seed)
    bundle = build_subspaces(V, p, ks, cfg.m, cfg.mu, tol=cfg.eig_tol, threads=cfg.threads)
    trace.iterates.append(_iterate_from(bundle, 0, V))
    logger.info(
        f"optimize_2d m={cfg.m}, V+={cfg.V_plus}, lattice=({p.a:.4f}, {p.b:.4f}), "
        f"init={strategy}/{seed}: G0 = {trace.final.G:.6f}"
    )

    calm = 0
    for it in range(1, cfg.max_iters + 1):
        previous = trace.final
        try:
            sol, cert = solve_gap_sdp(bundle, cfg.V_plus, tol=cfg.sdp_tol, solver=cfg.solver)
        except SolverStallError as e:
            trace.status = "stalled"
            trace.error = e.to_dict()
            logger.error(f"optimize_2d stalled at iteration {it}: {e.message}")
            e.trace = trace
            raise
        kkt = kkt_report(sol, cert, bundle)
        bang_bang = weakly_bang_bang_check(sol.V)
        if sol.G < previous.G - 10 * cfg.sdp_tol:
            logger.warning(f"SDP objective {sol.G:.8f} fell below the incumbent {previous.G:.8f}")

        dV = float(np.max(np.abs(sol.V.values - V.values)))
        V = sol.V
        bundle = build_subspaces(V, p, ks, cfg.m, cfg.mu, tol=cfg.eig_tol, threads=cfg.threads)
        current = _iterate_from(bundle, it, V, G_sdp=sol.G, dV=dV, kkt=kkt, bang_bang=bang_bang)
        trace.iterates.append(current)
        if current.G < previous.G - 10 * cfg.sdp_tol:
            logger.warning(f"Sampled G decreased {previous.G:.8f} -> {current.G:.8f} at iteration {it}")
        logger.info(
            f"optimize_2d iteration {it}: G = {current.G:.6f} (SDP {sol.G:.6f}), "
            f"max|dV| = {dV:.3g}, KKT max residual = {kkt.max_residual():.2e}"
        )

        if dV < cfg.eps_v * cfg.V_plus:
            trace.status = "stationary"
            break
        calm = calm + 1 if abs(current.G - previous.G) < cfg.eps_g else 0
        if calm >= CALM_ITERATIONS:
            trace.status = "stationary"
            break

    best = trace.best
    ceiling = min(high_contrast_g(), upper_bound_2d(cfg.m, p, cfg.V_plus))
    if best.G > ceiling + 1e-6:
        logger.warning(f"Best G {best.G:.6f} exceeds the analytic ceiling {ceiling:.6f}")
    logger.info(f"optimize_2d finished: {trace.status}, best G = {best.G:.6f} at iteration {best.iteration}")
    return trace


def optimize_2d_restarts(cfg: OptimizeConfig) -> List[OptimizeTrace]:
    """One trace per (strategy, seed) of the restart plan; stalled restarts are kept"""
    traces = []
    for strategy, seed in restart_plan(cfg.init, cfg.seed, cfg.restarts):
        try:
            traces.append(optimize_2d(cfg, strategy=strategy, seed=seed))
        except SolverStallError as e:
            traces.append(e.trace)
    best = max(traces, key=lambda t: t.best.G)
    logger.info(f"Best of {len(traces)} restarts: {best.strategy}/{best.seed} with G = {best.best.G:.6f}")
    return traces

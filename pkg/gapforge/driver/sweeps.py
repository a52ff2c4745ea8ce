"""
Contrast and lattice sweeps.

Contrast sweeps warm-start every V+ from the previous optimum, which stays
admissible as V+ grows, so G* is nondecreasing along the sweep.
"""

from concurrent.futures import ProcessPoolExecutor
from typing import List, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from gapforge.driver.components import component_analysis
from gapforge.driver.config import Optimize1DConfig, OptimizeConfig, SweepConfig
from gapforge.driver.initial import cosine_step
from gapforge.driver.optimize import optimize_2d
from gapforge.errors import GapForgeError, InvalidParamsError
from gapforge.hill1d.rearrange import optimize_1d
from gapforge.hill1d.steps import StepPotential
from gapforge.lattice.bravais import NAMED_LATTICES, LatticeParams
from gapforge.operators.potential import PotentialGrid
import logging

logger = logging.getLogger(__name__)


class ContrastPoint(BaseModel):
    V_plus: float
    G: Optional[float] = None
    status: str
    error: Optional[str] = None
    components: Optional[int] = None
    barrier_fraction: Optional[float] = None
    cold_G: Optional[float] = None


class ContrastSweep(BaseModel):
    m: int
    points: List[ContrastPoint]
    threshold: Optional[float] = None


class LatticePoint(BaseModel):
    a: float
    b: float
    G: Optional[float] = None
    status: str
    error: Optional[str] = None


class LatticeSweep(BaseModel):
    m: int
    V_plus: float
    points: List[LatticePoint]

    @property
    def best(self) -> LatticePoint:
        ok = [pt for pt in self.points if pt.G is not None]
        return max(ok, key=lambda pt: pt.G)

    def ranked(self) -> List[LatticePoint]:
        """Successful points, largest G first"""
        return sorted((pt for pt in self.points if pt.G is not None), key=lambda pt: -pt.G)


def _threshold(points: List[ContrastPoint], eps_g: float) -> Optional[float]:
    return next((pt.V_plus for pt in points if pt.G is not None and pt.G > eps_g), None)


def contrast_sweep(
    m: int, lattice, Vp_list: Sequence[float], cfg: OptimizeConfig, cold_compare: bool = False
) -> ContrastSweep:
    if list(Vp_list) != sorted(Vp_list):
        raise InvalidParamsError("Vp_list must be ascending")
    points: List[ContrastPoint] = []
    V_prev = None
    for Vp in Vp_list:
        run_cfg = cfg.model_copy(update={"m": m, "lattice": lattice, "V_plus": float(Vp)})
        init = None
        if V_prev is not None:
            init = PotentialGrid(d=2, n=V_prev.n, values=V_prev.values, v_plus=float(Vp))
        try:
            trace = optimize_2d(run_cfg, init=init)
        except GapForgeError as e:
            # the previous optimum stays the warm start for the next V+
            logger.error(f"Contrast point V+={Vp} failed: {e.message}")
            points.append(ContrastPoint(V_plus=float(Vp), status="failed", error=e.message))
            continue
        best = trace.best
        cold = None
        if cold_compare and init is not None:
            try:
                cold = optimize_2d(run_cfg).best.G
            except GapForgeError as e:
                logger.warning(f"Cold-start comparison at V+={Vp} failed: {e.message}")
        if cold is not None and cold > best.G + 1e-9:
            logger.warning(f"Cold start beat the warm start at V+={Vp}: {cold:.6f} > {best.G:.6f}")
        comps = component_analysis(best.V, p=run_cfg.params).count
        points.append(
            ContrastPoint(V_plus=float(Vp), G=best.G, status=trace.status, components=comps, cold_G=cold)
        )
        logger.info(f"contrast sweep m={m} V+={Vp}: G* = {best.G:.6f}, {comps} components")
        V_prev = best.V
    return ContrastSweep(m=m, points=points, threshold=_threshold(points, cfg.eps_g))


def contrast_sweep_1d(
    m: int, Vp_list: Sequence[float], cfg: Optional[Optimize1DConfig] = None
) -> ContrastSweep:
    cfg = cfg or Optimize1DConfig(m=m)
    points: List[ContrastPoint] = []
    V_prev: Optional[StepPotential] = None
    for Vp in Vp_list:
        if V_prev is None:
            init = cosine_step(cfg.X, m, float(Vp))
        else:
            init = StepPotential(
                X=cfg.X, breakpoints=V_prev.breakpoints, values=V_prev.values, V_plus=float(Vp)
            )
        try:
            result = optimize_1d(init, m, cfg.max_iters, cfg.eps)
        except GapForgeError as e:
            logger.error(f"1D contrast point V+={Vp} failed: {e.message}")
            points.append(ContrastPoint(V_plus=float(Vp), status="failed", error=e.message))
            continue
        best = result.best
        points.append(
            ContrastPoint(
                V_plus=float(Vp), G=best.G, status=result.status,
                barrier_fraction=best.potential.barrier_fraction(),
            )
        )
        logger.info(f"1D contrast sweep m={m} V+={Vp}: G* = {best.G:.6f}")
        V_prev = best.potential
    return ContrastSweep(m=m, points=points, threshold=_threshold(points, 1e-4))


def lattice_grid(cfg: SweepConfig) -> List[LatticeParams]:
    """Grid over the bounding box of the fundamental domain plus the named lattices"""
    grid = []
    for a in np.linspace(*cfg.a_range, cfg.resolution):
        for b in np.linspace(*cfg.b_range, cfg.resolution):
            p = LatticeParams(a=float(a), b=float(b))
            if p.in_domain():
                grid.append(p)
    if cfg.include_named:
        for p in NAMED_LATTICES.values():
            if not any(abs(p.a - q.a) < 1e-12 and abs(p.b - q.b) < 1e-12 for q in grid):
                grid.append(p)
    return grid


def _lattice_point(args) -> LatticePoint:
    base, a, b = args
    run_cfg = OptimizeConfig.model_validate(
        {**base, "lattice": {"a": a, "b": b}, "kpoints": {**base["kpoints"], "kind": "half_bz"}, "threads": None}
    )
    try:
        trace = optimize_2d(run_cfg)
        return LatticePoint(a=a, b=b, G=trace.best.G, status=trace.status)
    except GapForgeError as e:
        logger.error(f"Lattice point ({a:.4f}, {b:.4f}) failed: {e.message}")
        return LatticePoint(a=a, b=b, status="failed", error=e.message)


def lattice_sweep(cfg: SweepConfig, threads: Optional[int] = None) -> LatticeSweep:
    opt = cfg.optimize
    base = opt.model_dump()
    jobs = [(base, p.a, p.b) for p in lattice_grid(cfg)]
    logger.info(f"Lattice sweep m={opt.m}, V+={opt.V_plus}: {len(jobs)} lattices")
    if threads is not None and threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            points = list(pool.map(_lattice_point, jobs))
    else:
        points = [_lattice_point(job) for job in jobs]
    sweep = LatticeSweep(m=opt.m, V_plus=opt.V_plus, points=points)
    if any(pt.G is not None for pt in sweep.points):
        best = sweep.best
        logger.info(f"Best lattice: (a={best.a:.4f}, b={best.b:.4f}) with G = {best.G:.6f}")
    return sweep

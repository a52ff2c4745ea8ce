"""
Built-in acceptance suite at desk scale.

Every check returns (passed, value, expected, detail); the runner times it,
turns raised errors into failed rows and never stops early.
"""

import math
import time
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, List, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel

from gapforge.bands.bounds import (
    default_bessel_zeros,
    disk_union_gap,
    high_contrast_g,
    ratio_gap,
    upper_bound_2d,
)
from gapforge.bands.checks import symmetry_check
from gapforge.bands.dispersion import dispersion, free_bands
from gapforge.cli.config import VerifyConfig
from gapforge.cli.io import write_csv, write_json
from gapforge.cli.manifest import RunManifest
from gapforge.driver.config import OptimizeConfig, SweepConfig
from gapforge.driver.initial import cosine_step, disk_array
from gapforge.driver.optimize import optimize_2d_restarts
from gapforge.driver.sweeps import contrast_sweep, lattice_sweep
from gapforge.errors import EXIT_NUMERIC, EXIT_OK
from gapforge.hill1d.certificates import (
    equal_interval_high_contrast,
    kp_gap_ratio,
    optimal_b_search,
    verify_1d_certificates,
)
from gapforge.hill1d.kronig_penney import kp_gap_edges, step_gap_edges
from gapforge.hill1d.rearrange import Optimize1DResult, gap_of, grid_edge_vectors, optimize_1d
from gapforge.hill1d.steps import StepPotential, periodic_extension
from gapforge.lattice.bravais import SQUARE, LatticeParams, basis_from_params, reduce_to_fundamental
from gapforge.lattice.kpoints import full_bz_grid, half_bz_grid, single_k
from gapforge.operators.potential import PotentialGrid
from gapforge.sdpopt.kkt import kkt_report, weakly_bang_bang_check
from gapforge.sdpopt.solver import solve_gap_sdp
from gapforge.sdpopt.subspaces import build_subspaces
from gapforge.utils.metrics import performance_metrics
import logging

logger = logging.getLogger(__name__)

OPTIMAL_G_1D = {1: 1.12370, 2: 0.74391, 3: 0.46766, 4: 0.30895, 5: 0.21550}
OPTIMAL_G_2D = {("square", 1): 0.7722, ("triangular", 1): 0.7963, ("square", 2): 0.5461}
# f(x) = 2(x - 1)/(x + 1) at x = (j11/j01)^2 = 2.538734 with j01 = 2.4048255577, j11 = 3.8317059702
G_HIGH_CONTRAST = 0.869652

CheckResult = Tuple[bool, Any, Any, str]


class VerifyRow(BaseModel):
    name: str
    group: str
    passed: bool
    value: Optional[Any] = None
    expected: Optional[Any] = None
    detail: str = ""
    seconds: float = 0.0


class Check(NamedTuple):
    name: str
    group: str
    run: Callable[[], CheckResult]
    full_only: bool = False


@lru_cache(maxsize=8)
def _optimum_1d(m: int) -> Optimize1DResult:
    return optimize_1d(cosine_step(1.0, m, 100.0), m)


def _ratio_1d(m: int) -> Callable[[], CheckResult]:
    def run() -> CheckResult:
        G = _optimum_1d(m).best.G
        return abs(G - OPTIMAL_G_1D[m]) <= 1e-3, G, OPTIMAL_G_1D[m], "X = 1, V+ = 100, tol 1e-3"

    return run


def _certificate_1d(m: int) -> Callable[[], CheckResult]:
    def run() -> CheckResult:
        cert = verify_1d_certificates(_optimum_1d(m).best.potential, m)
        detail = (
            f"transitions {cert.transitions}, bang-bang fraction {cert.bang_bang_fraction:.4f}, "
            f"sign violation measure {cert.sign_violation_measure:.2e}"
        )
        return cert.passes and cert.bang_bang_fraction >= 0.999, cert.G, "certificate", detail

    return run


def check_barrier_geometry() -> CheckResult:
    result = optimize_1d(StepPotential.barrier(1.0, 0.8, 100.0), 1)
    fraction = result.best.potential.barrier_fraction()
    ok = abs(fraction - 0.42) <= 0.01 and result.status == "stationary" and result.iterations <= 15
    return ok, fraction, 0.42, f"{result.iterations} iterations from b = 0.8"


def check_low_contrast_b_star() -> CheckResult:
    b_star, _ = optimal_b_search(1.0, 1e-3)
    return abs(b_star - 0.5) <= 1e-2, b_star, 0.5, "V+ = 1e-3"


def check_high_contrast_limit() -> CheckResult:
    values = [kp_gap_ratio(b, 1.0, 1e6) for b in (0.1, 0.3, 0.5)]
    worst = max(abs(v - 1.2) for v in values)
    return worst <= 1e-2, values, 1.2, "V+ = 1e6, b in {0.1, 0.3, 0.5}"


def check_equal_intervals() -> CheckResult:
    values = [equal_interval_high_contrast(m) for m in (1, 2, 3)]
    ok = all(abs(v - 1.2) <= 1e-12 for v in values) and equal_interval_high_contrast(2, [0.4, 0.6]) < 1.2
    return ok, values, 1.2, "m = 1, 2, 3; unequal (0.4, 0.6) strictly smaller"


def check_periodic_extension() -> CheckResult:
    tiled = periodic_extension(StepPotential.barrier(1.0, 0.3, 100.0), 2)
    _, _, G2 = gap_of(tiled, 2)
    _, _, G1 = gap_of(StepPotential.barrier(1.0, 0.3, 25.0), 1)
    _, _, first = gap_of(tiled, 1)
    return abs(G2 - G1) <= 1e-8 and first <= 1e-12, G2, G1, "G_2 of the tiled barrier vs G_1 at V+/4"


def check_kp_vs_transfer() -> CheckResult:
    V = StepPotential.barrier(1.0, 0.3, 100.0)
    worst = 0.0
    for m in (1, 2, 3):
        kp = np.array(kp_gap_edges(0.3, 1.0, 100.0, m))
        tm = np.array(step_gap_edges(V, m))
        worst = max(worst, float(np.max(np.abs(kp - tm) / np.maximum(1.0, np.abs(kp)))))
    return worst <= 1e-9, worst, 1e-9, "gap edges m = 1..3"


def check_high_contrast_g() -> CheckResult:
    table = default_bessel_zeros()
    g = high_contrast_g(table)
    ok = abs(g - G_HIGH_CONTRAST) <= 1e-5 and max(table.residuals()) <= 1e-12
    return ok, g, G_HIGH_CONTRAST, "Bessel zeros j01, j11"


def check_disk_union() -> CheckResult:
    table = default_bessel_zeros()
    equal = disk_union_gap([0.2, 0.2], table)
    unequal = disk_union_gap([0.15, 0.2], table)
    formula = ratio_gap(table.j11**2 * 0.15**2 / (table.j01**2 * 0.2**2))
    ok = abs(equal - high_contrast_g(table)) <= 1e-12 and unequal < equal and abs(unequal - formula) <= 1e-3
    return ok, unequal, formula, f"equal radii give {equal:.6f}"


def check_small_sdp() -> CheckResult:
    tol = 1e-7
    V = PotentialGrid.from_mask(np.indices((8, 8)).sum(axis=0) % 8 < 4, 100.0)
    ks = half_bz_grid(basis_from_params(SQUARE), 2)
    bundle = build_subspaces(V, SQUARE, ks, 1, 2)
    sol, cert = solve_gap_sdp(bundle, 100.0, tol=tol)
    report = kkt_report(sol, cert, bundle)
    bang_bang = weakly_bang_bang_check(sol.V)
    ok = (
        report.max_residual() <= 1e-4
        and bang_bang.weakly_bang_bang
        and sol.G >= sol.incumbent_G - 10 * tol
        and sol.G <= high_contrast_g() + 1e-6
    )
    detail = f"G {sol.incumbent_G:.6f} -> {sol.G:.6f}, interior fraction {bang_bang.interior_fraction:.3f}"
    return ok, report.max_residual(), 1e-4, detail


def check_embedding_1d() -> CheckResult:
    result = optimize_1d(StepPotential.barrier(1.0, 0.8, 100.0).to_grid(128), 1, max_iters=100)
    V = result.final.potential
    bundle = build_subspaces(V, None, single_k(np.pi / V.period), 1, 1)
    sol, _ = solve_gap_sdp(bundle, 100.0, tol=1e-8)
    alpha, beta, ua, ub = grid_edge_vectors(V, 1)
    phi = ua**2 / alpha - ub**2 / beta
    decided = np.abs(phi) > 1e-2 * np.abs(phi).max()
    mismatched = int(np.count_nonzero((sol.V.values > 50.0)[decided] != V.upper_mask()[decided]))
    ok = result.status == "stationary" and abs(sol.G - result.final.G) <= 1e-4 and mismatched == 0
    return ok, sol.G, result.final.G, f"n = 128, one band each side at k = pi, {mismatched} cells differ"


def check_weyl_decay() -> CheckResult:
    bounds = [upper_bound_2d(m, SQUARE, 100.0, n=16) for m in (5, 10, 15, 20)]
    return bounds[-1] < bounds[0], bounds, "decreasing", "upper_bound_2d at m = 5, 10, 15, 20"


def check_convergence_order() -> CheckResult:
    k = single_k([0.3, 0.7])
    exact = free_bands(k, 5, p=SQUARE)[:, 0]
    errors = []
    for n in (16, 32, 64):
        V = PotentialGrid.constant(2, n, 0.0, 0.0)
        errors.append(float(np.max(np.abs(dispersion(V, SQUARE, k, 5).energies[:, 0] - exact))))
    orders = [math.log2(errors[0] / errors[1]), math.log2(errors[1] / errors[2])]
    return all(1.7 <= q <= 2.3 for q in orders), orders, 2.0, "free spectrum, n = 16, 32, 64"


def check_band_symmetry() -> CheckResult:
    p = LatticeParams(a=0.3, b=1.2)
    rng = np.random.default_rng(7)
    V = PotentialGrid(d=2, n=12, values=rng.uniform(0.0, 10.0, (12, 12)), v_plus=10.0)
    table = dispersion(V, p, full_bz_grid(basis_from_params(p), 3), 4)
    deviation = symmetry_check(table)
    return deviation <= 1e-8, deviation, 1e-8, "random real potential, generic lattice"


def check_lattice_reduction() -> CheckResult:
    rng = np.random.default_rng(11)
    elementary = [np.array([[1, 1], [0, 1]]), np.array([[1, 0], [1, 1]]), np.array([[0, -1], [1, 0]])]
    worst = 0.0
    for _ in range(100):
        a = rng.uniform(0.05, 0.45)
        b = rng.uniform(math.sqrt(max(1.05 - a * a, 0.0)), 2.0)
        U = np.eye(2)
        for _ in range(rng.integers(1, 8)):
            E = elementary[rng.integers(len(elementary))]
            U = U @ (E if rng.random() < 0.5 else np.linalg.inv(E))
        t = rng.uniform(0.0, 2 * math.pi)
        R = np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])
        if rng.random() < 0.5:
            R = R @ np.diag([1.0, -1.0])
        s = math.exp(rng.uniform(-2.0, 2.0))
        q = reduce_to_fundamental(s * R @ basis_from_params(LatticeParams(a=a, b=b)) @ U)
        worst = max(worst, abs(q.a - a), abs(q.b - b))
    return worst <= 1e-9, worst, 1e-9, "100 random unimodular changes of basis, rotations, reflections and scalings"


def _ratio_2d(lattice: str, m: int) -> Callable[[], CheckResult]:
    def run() -> CheckResult:
        cfg = OptimizeConfig(m=m, V_plus=100.0, lattice=lattice, n=32)
        G = max(t.best.G for t in optimize_2d_restarts(cfg))
        target = OPTIMAL_G_2D[(lattice, m)]
        return abs(G - target) <= 0.05 * target, G, target, "n = 32, 24 IBZ points, best of 5"

    return run


def check_disk_array_limit() -> CheckResult:
    V = disk_array(64, 1, 1e4, SQUARE)
    table = dispersion(V, SQUARE, half_bz_grid(basis_from_params(SQUARE), 4), 2)
    G = ratio_gap(table.energies[1].min() / table.energies[0].max())
    return abs(G - G_HIGH_CONTRAST) <= 0.05 * G_HIGH_CONTRAST, G, G_HIGH_CONTRAST, "n = 64, V+ = 1e4"


def _edge_ratio(V: PotentialGrid, m: int) -> float:
    table = dispersion(V, SQUARE, half_bz_grid(basis_from_params(SQUARE), 4), m + 1)
    return ratio_gap(table.energies[m].min() / table.energies[m - 1].max())


def check_unequal_disks() -> CheckResult:
    radii = [0.15, 0.2]
    equal = _edge_ratio(disk_array(64, 2, 1e4, SQUARE), 2)
    unequal = _edge_ratio(disk_array(64, 2, 1e4, SQUARE, radii=radii), 2)
    formula = disk_union_gap(radii)
    ok = unequal < equal and abs(unequal - formula) <= 0.15 * formula
    return ok, unequal, formula, f"n = 64, V+ = 1e4, equal radii give {equal:.4f}"


def check_contrast_threshold() -> CheckResult:
    cfg = OptimizeConfig(
        m=3, V_plus=10.0, n=24, max_iters=15, kpoints={"kind": "half_bz", "resolution": 4}
    )
    sweep = contrast_sweep(3, "square", [10.0 * i for i in range(1, 9)], cfg)
    t = sweep.threshold
    return t is not None and 30.0 <= t <= 50.0, t, [30.0, 50.0], "m = 3, square, n = 24, V+ = 10 ... 80"


def _lattice_ranking(m: int, target: Tuple[float, float]) -> Callable[[], CheckResult]:
    def run() -> CheckResult:
        cfg = SweepConfig(
            kind="lattice", resolution=6,
            optimize=OptimizeConfig(
                m=m, V_plus=100.0, n=24, max_iters=10, kpoints={"kind": "half_bz", "resolution": 4}
            ),
        )
        best = lattice_sweep(cfg).best
        step_a = (cfg.a_range[1] - cfg.a_range[0]) / (cfg.resolution - 1)
        step_b = (cfg.b_range[1] - cfg.b_range[0]) / (cfg.resolution - 1)
        ok = abs(best.a - target[0]) <= step_a + 1e-9 and abs(best.b - target[1]) <= step_b + 1e-9
        return ok, [best.a, best.b], list(target), f"best G = {best.G:.4f} on a 6 x 6 grid, n = 24"

    return run


def checks() -> List[Check]:
    suite = [Check(f"optimal_ratio_1d_m{m}", "1d", _ratio_1d(m)) for m in OPTIMAL_G_1D]
    suite += [Check(f"certificate_m{m}", "1d", _certificate_1d(m)) for m in (1, 2, 3)]
    suite += [
        Check("barrier_geometry", "1d", check_barrier_geometry),
        Check("low_contrast_b_star", "1d", check_low_contrast_b_star),
        Check("high_contrast_limit_1d", "1d", check_high_contrast_limit),
        Check("equal_intervals", "1d", check_equal_intervals),
        Check("periodic_extension", "1d", check_periodic_extension),
        Check("high_contrast_g", "2d", check_high_contrast_g),
        Check("disk_union_gap", "2d", check_disk_union),
        Check("small_sdp_kkt", "2d", check_small_sdp),
        Check("embedding_1d", "2d", check_embedding_1d),
        Check("upper_bound_decay", "2d", check_weyl_decay),
        Check("kp_vs_transfer", "numerics", check_kp_vs_transfer),
        Check("convergence_order", "numerics", check_convergence_order),
        Check("band_symmetry", "numerics", check_band_symmetry),
        Check("lattice_reduction", "numerics", check_lattice_reduction),
    ]
    suite += [
        Check(f"optimal_ratio_{lattice}_m{m}", "2d", _ratio_2d(lattice, m), full_only=True)
        for lattice, m in OPTIMAL_G_2D
    ]
    suite += [
        Check("disk_array_limit", "2d", check_disk_array_limit, full_only=True),
        Check("unequal_disks", "2d", check_unequal_disks, full_only=True),
        Check("contrast_threshold_m3", "2d", check_contrast_threshold, full_only=True),
        Check("lattice_ranking_m1", "2d", _lattice_ranking(1, (0.5, math.sqrt(3) / 2)), full_only=True),
        Check("lattice_ranking_m2", "2d", _lattice_ranking(2, (0.0, math.sqrt(3))), full_only=True),
    ]
    return suite


def run_checks(cfg: VerifyConfig) -> List[VerifyRow]:
    rows = []
    for check in checks():
        if cfg.only and check.group not in cfg.only:
            continue
        if check.full_only and not cfg.full:
            continue
        start = time.perf_counter()
        try:
            passed, value, expected, detail = check.run()
        except Exception as e:
            logger.error(f"Check {check.name} raised {type(e).__name__}: {e}")
            passed, value, expected, detail = False, None, None, f"{type(e).__name__}: {e}"
        row = VerifyRow(
            name=check.name, group=check.group, passed=bool(passed), value=value, expected=expected,
            detail=detail, seconds=time.perf_counter() - start,
        )
        logger.info(f"{row.name}: {'PASS' if row.passed else 'FAIL'} ({row.seconds:.2f}s)")
        rows.append(row)
    return rows


def _cell(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if isinstance(value, list):
        return "[" + ", ".join(_cell(v) for v in value) + "]"
    return "" if value is None else str(value)


def format_table(rows: List[VerifyRow]) -> str:
    lines = [f"{'check':<28} {'group':<9} {'result':<6} {'seconds':>8}  value / expected"]
    for r in rows:
        lines.append(
            f"{r.name:<28} {r.group:<9} {'PASS' if r.passed else 'FAIL':<6} {r.seconds:>8.2f}  "
            f"{_cell(r.value)} / {_cell(r.expected)}"
        )
    passed = sum(r.passed for r in rows)
    lines.append(f"{passed}/{len(rows)} checks passed in {sum(r.seconds for r in rows):.1f}s")
    return "\n".join(lines)


def cmd_verify(cfg: VerifyConfig, threads: int) -> int:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(command="verify", config=cfg.model_dump(), seeds=[cfg.seed], threads=threads)
    rows = run_checks(cfg)
    print(format_table(rows))
    stats = performance_metrics.get_stats()
    for op, s in sorted(stats.get("operations", {}).items()):
        print(f"  {op:<20} {s['count']:>6} calls {s['total_duration']:>10.2f}s")

    files = [
        write_csv(
            out / "verify.csv",
            ["name", "group", "passed", "seconds", "value", "expected", "detail"],
            [(r.name, r.group, r.passed, r.seconds, _cell(r.value), _cell(r.expected), r.detail) for r in rows],
        ),
        write_json(out / "verify.json", [r.model_dump() for r in rows]),
    ]
    if performance_metrics.export_metrics(out / "metrics.json"):
        files.append(out / "metrics.json")
    code = EXIT_OK if rows and all(r.passed for r in rows) else EXIT_NUMERIC
    for f in files:
        manifest.add(f, out)
    manifest.finish(out, code, stats)
    return code

"""
Sub-command implementations. Each takes a validated config and the resolved
worker count, writes its outputs under cfg.out and returns the exit code.
"""

import json
import sys
from pathlib import Path
from typing import Any, Dict, List

import numpy as np

from gapforge.bands.bounds import high_contrast_g, upper_bound_1d, upper_bound_2d
from gapforge.bands.dispersion import dispersion, free_bands, gap_report
from gapforge.cli.config import BandsConfig
from gapforge.cli.io import (
    write_csv,
    write_dispersion,
    write_eigenfunctions,
    write_json,
    write_jsonl,
    write_potential_grid,
    write_step_potential,
    read_potential_grid,
    sidecar_path,
)
from gapforge.cli.manifest import RunManifest
from gapforge.cli.plots import (
    plot_bands,
    plot_contrast_sweeps,
    plot_lattice_sweep,
    plot_potential,
    plot_potential_1d,
)
from gapforge.driver.components import component_analysis
from gapforge.driver.config import Optimize1DConfig, OptimizeConfig, SweepConfig
from gapforge.driver.initial import cosine_step, init_potential, random_bangbang
from gapforge.driver.optimize import build_sampling, optimize_2d_restarts
from gapforge.driver.sweeps import contrast_sweep, contrast_sweep_1d, lattice_sweep
from gapforge.errors import EXIT_NUMERIC, EXIT_OK, BudgetExhaustedError, ConfigError
from gapforge.hill1d.certificates import verify_1d_certificates
from gapforge.hill1d.rearrange import optimize_1d
from gapforge.hill1d.steps import StepPotential
from gapforge.hill1d.transfer import edge_eigenfunctions
from gapforge.lattice.bravais import NAMED_LATTICES, basis_from_params, parse_lattice
from gapforge.lattice.kpoints import half_bz_grid, lattice_path, line_1d
from gapforge.operators.potential import PotentialGrid
from gapforge.utils.metrics import performance_metrics, track_performance
import logging

logger = logging.getLogger(__name__)

STATUS_EXIT = {"stationary": EXIT_OK, "budget": BudgetExhaustedError.exit_code, "stalled": EXIT_NUMERIC}


def _status_exit(command: str, status: str, iterations: int, G: float) -> int:
    """Exit code for an optimizer status; budget exhaustion is reported like any other error"""
    if status == "budget":
        err = BudgetExhaustedError(
            f"{command} used all {iterations} iterations without becoming stationary",
            iterations=iterations,
            G=G,
        )
        logger.warning(err.message)
        print(json.dumps(err.to_dict(), default=str), file=sys.stderr)
    return STATUS_EXIT[status]


def _out_dir(cfg) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(manifest: RunManifest, out: Path, files: List[Path], code: int) -> int:
    if performance_metrics.export_metrics(out / "metrics.json"):
        files = [*files, out / "metrics.json"]
    for f in files:
        manifest.add(f, out)
    manifest.finish(out, code, performance_metrics.get_stats())
    logger.info(f"{manifest.command} finished with exit code {code}, {len(files)} files in {out}")
    return code


def _bands_potential(cfg: BandsConfig) -> PotentialGrid:
    if cfg.potential == "file":
        return read_potential_grid(Path(cfg.potential_file), cfg.V_plus, d=cfg.dim, period=cfg.X)
    if cfg.potential == "zero":
        return PotentialGrid.constant(cfg.dim, cfg.n, 0.0, cfg.V_plus, period=cfg.X)
    if cfg.dim == 1:
        if cfg.potential == "cosine":
            return cosine_step(cfg.X, cfg.m, cfg.V_plus).to_grid(cfg.n)
        if cfg.potential == "random-bangbang":
            field = random_bangbang(cfg.n, cfg.V_plus, cfg.seed, d=1)
            return PotentialGrid(d=1, n=cfg.n, values=field.values, v_plus=cfg.V_plus, period=cfg.X)
        raise ConfigError(f"Potential '{cfg.potential}' is two-dimensional only", field="potential")
    return init_potential(cfg.potential, cfg.n, cfg.m, cfg.V_plus, parse_lattice(cfg.lattice), cfg.seed)


@track_performance("cmd_bands")
def cmd_bands(cfg: BandsConfig, threads: int) -> int:
    out = _out_dir(cfg)
    manifest = RunManifest(command="bands", config=cfg.model_dump(), seeds=[cfg.seed], threads=threads)
    V = _bands_potential(cfg)
    if cfg.dim == 1:
        p = None
        ks = line_1d(cfg.X, cfg.k_points_1d)
    else:
        p = parse_lattice(cfg.lattice)
        if p.kind == "generic":
            ks = half_bz_grid(basis_from_params(p), cfg.points_per_side)
        else:
            ks = lattice_path(p, cfg.points_per_side)

    table = dispersion(V, p, ks, cfg.bands, threads=threads)
    report: Dict[str, Any] = {
        "dim": cfg.dim,
        "sampling": ks.kind,
        "k_points": len(ks),
        "gap": gap_report(table, cfg.m).model_dump(),
    }
    if cfg.potential == "zero":
        exact = free_bands(ks, cfg.bands, p=p, X=cfg.X)
        report["free_band_deviation"] = float(np.max(np.abs(exact - table.energies)))

    files = [
        write_dispersion(out / "dispersion.csv", table),
        write_potential_grid(out / "potential.csv", V),
        sidecar_path(out / "potential.csv"),
        write_json(out / "report.json", report),
        plot_bands(out / "bands.svg", table, cfg.m),
    ]
    if cfg.dim == 2:
        files.append(plot_potential(out / "potential.svg", V, p))
    else:
        files.append(plot_potential_1d(out / "potential.svg", V))
    return _finish(manifest, out, files, EXIT_OK)


@track_performance("cmd_optimize1d")
def cmd_optimize1d(cfg: Optimize1DConfig, threads: int) -> int:
    out = _out_dir(cfg)
    manifest = RunManifest(command="optimize1d", config=cfg.model_dump(), seeds=[cfg.seed], threads=threads)
    if cfg.init == "cosine":
        init = cosine_step(cfg.X, cfg.m, cfg.V_plus)
    else:
        init = StepPotential.barrier(cfg.X, cfg.b, cfg.V_plus)
    if cfg.representation == "grid":
        init = init.to_grid(cfg.n)

    result = optimize_1d(init, cfg.m, cfg.max_iters, cfg.eps)
    best = result.best
    V = best.potential
    report: Dict[str, Any] = {
        "m": cfg.m,
        "status": result.status,
        "iterations": result.iterations,
        "G": best.G,
        "alpha": best.alpha,
        "beta": best.beta,
        "upper_bound": upper_bound_1d(cfg.m, cfg.X, cfg.V_plus),
    }
    trace = [{"iteration": i, **it.to_dict()} for i, it in enumerate(result.history)]
    files = [write_jsonl(out / "trace.jsonl", trace)]

    if isinstance(V, StepPotential):
        report["barrier_fraction"] = V.barrier_fraction()
        report["transitions"] = V.transitions()
        report["certificate"] = verify_1d_certificates(V, cfg.m).model_dump()
        ef = edge_eigenfunctions(V, cfg.m) if best.G > 0 else None
        files.append(write_step_potential(out / "potential.json", V))
        if ef is not None:
            files.append(write_eigenfunctions(out / "eigenfunctions.csv", ef))
        files.append(plot_potential_1d(out / "potential.svg", V, ef))
    else:
        report["barrier_fraction"] = float(V.upper_mask().mean())
        files.append(write_potential_grid(out / "potential.csv", V))
        files.append(sidecar_path(out / "potential.csv"))
        files.append(plot_potential_1d(out / "potential.svg", V))
    files.append(write_json(out / "report.json", report))
    logger.info(f"optimize1d m={cfg.m}: G* = {best.G:.6f} ({result.status})")
    return _finish(manifest, out, files, _status_exit("optimize1d", result.status, result.iterations, best.G))


@track_performance("cmd_optimize2d")
def cmd_optimize2d(cfg: OptimizeConfig, threads: int) -> int:
    out = _out_dir(cfg)
    cfg = cfg.model_copy(update={"threads": threads})
    manifest = RunManifest(command="optimize2d", config=cfg.model_dump(), threads=threads)
    traces = optimize_2d_restarts(cfg)
    manifest.seeds = sorted({t.seed for t in traces})
    trace = max(traces, key=lambda t: t.best.G)
    best = trace.best
    p = cfg.params

    records = []
    for r, t in enumerate(traces):
        records += [{"restart": r, "strategy": t.strategy, "seed": t.seed, **rec} for rec in t.to_records()]
    ks = build_sampling(cfg, p)
    table = dispersion(best.V, p, ks, cfg.m + 2, tol=cfg.eig_tol, threads=threads)
    # KKT data belongs to the solve that produced the potential
    kkt = best.kkt if best.kkt is not None else trace.final.kkt
    report: Dict[str, Any] = {
        **trace.summary(),
        "restarts": [t.summary() for t in traces],
        "gap": gap_report(table, cfg.m).model_dump(),
        "kkt": kkt.model_dump() if kkt is not None else None,
        "components": component_analysis(best.V, p=p).model_dump(),
        "bounds": {
            "upper_bound_2d": upper_bound_2d(cfg.m, p, cfg.V_plus),
            "high_contrast_g": high_contrast_g(),
        },
    }
    files = [
        write_potential_grid(out / "potential.csv", best.V),
        sidecar_path(out / "potential.csv"),
        write_dispersion(out / "dispersion.csv", table),
        write_jsonl(out / "trace.jsonl", records),
        write_json(out / "report.json", report),
        plot_potential(out / "potential.svg", best.V, p),
        plot_bands(out / "bands.svg", table, cfg.m),
    ]
    logger.info(f"optimize2d m={cfg.m}: best G = {best.G:.6f} from {trace.strategy}/{trace.seed}")
    return _finish(manifest, out, files, _status_exit("optimize2d", trace.status, len(trace.iterates) - 1, best.G))


@track_performance("cmd_sweep")
def cmd_sweep(cfg: SweepConfig, threads: int) -> int:
    out = _out_dir(cfg)
    manifest = RunManifest(command="sweep", config=cfg.model_dump(), seeds=[cfg.seed], threads=threads)
    files: List[Path] = []

    if cfg.kind == "lattice":
        sweep = lattice_sweep(cfg, threads)
        rows = [(pt.a, pt.b, pt.G, pt.status, pt.error) for pt in sweep.points]
        files.append(write_csv(out / "lattice_sweep.csv", ["a", "b", "G", "status", "error"], rows))
        files.append(plot_lattice_sweep(out / "lattice_sweep.svg", sweep))
        failed = sum(pt.G is None for pt in sweep.points)
        summary: Dict[str, Any] = {
            "m": sweep.m, "V_plus": sweep.V_plus, "points": len(sweep.points), "failed": failed,
        }
        if failed < len(sweep.points):
            summary["best"] = sweep.best.model_dump()
            summary["ranking"] = [pt.model_dump() for pt in sweep.ranked()[:5]]
        files.append(write_json(out / "report.json", summary))
        code = EXIT_NUMERIC if failed == len(sweep.points) else EXIT_OK
        return _finish(manifest, out, files, code)

    if cfg.dim == 1:
        sweeps = {"1d": contrast_sweep_1d(cfg.optimize1d.m, cfg.Vp_list, cfg.optimize1d)}
    else:
        opt = cfg.optimize.model_copy(update={"threads": threads})
        lattices = list(NAMED_LATTICES) if cfg.include_named else [opt.lattice]
        sweeps = {
            str(lat): contrast_sweep(opt.m, lat, cfg.Vp_list, opt, cold_compare=cfg.cold_compare)
            for lat in lattices
        }

    header = ["lattice", "V_plus", "G", "status", "components", "barrier_fraction", "cold_G", "error"]
    rows = [
        (label, pt.V_plus, pt.G, pt.status, pt.components, pt.barrier_fraction, pt.cold_G, pt.error)
        for label, sweep in sweeps.items()
        for pt in sweep.points
    ]
    files.append(write_csv(out / "contrast_sweep.csv", header, rows))
    files.append(plot_contrast_sweeps(out / "contrast_sweep.svg", sweeps))
    report = {
        label: {"m": s.m, "threshold": s.threshold, "failed": sum(pt.G is None for pt in s.points)}
        for label, s in sweeps.items()
    }
    files.append(write_json(out / "report.json", report))
    all_failed = all(pt.G is None for s in sweeps.values() for pt in s.points)
    return _finish(manifest, out, files, EXIT_NUMERIC if all_failed else EXIT_OK)

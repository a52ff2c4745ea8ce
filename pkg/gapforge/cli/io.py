"""
Result files: CSV tables at 12 significant digits, JSON reports, JSON-lines traces.
"""

import csv
import json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from gapforge.bands.dispersion import DispersionTable
from gapforge.errors import ConfigError
from gapforge.hill1d.steps import StepPotential
from gapforge.hill1d.transfer import EdgeEigenfunctions
from gapforge.operators.potential import PotentialGrid
import logging

logger = logging.getLogger(__name__)

PRECISION = 12


def fmt(value: Any) -> str:
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.{PRECISION}g}"
    if value is None:
        return ""
    return str(value)


def _jsonable(obj: Any):
    if isinstance(obj, BaseModel):
        return obj.model_dump()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, Path):
        return str(obj)
    raise TypeError(f"Object of type {type(obj).__name__} is not JSON serializable")


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    logger.info(f"Wrote {path}")
    return path


def write_json(path: Path, payload: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")
    logger.info(f"Wrote {path}")
    return path


def write_jsonl(path: Path, records: Iterable[Dict[str, Any]]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w") as f:
        for record in records:
            f.write(json.dumps(record, sort_keys=True, default=_jsonable) + "\n")
    logger.info(f"Wrote {path}")
    return path


def write_dispersion(path: Path, table: DispersionTable) -> Path:
    labels = dict(table.ks.labels)
    kcols = [f"k{i + 1}" for i in range(table.ks.dim)]
    header = ["k_index", "arc", *kcols, "label", *[f"E{j + 1}" for j in range(table.bands)]]
    rows = []
    for i, k in enumerate(table.ks.points):
        rows.append([i, float(table.ks.arc[i]), *[float(c) for c in k], labels.get(i, ""), *table.energies[:, i]])
    return write_csv(path, header, rows)


def sidecar_path(path: Path) -> Path:
    """JSON metadata written next to a potential CSV"""
    return Path(path).with_suffix(".json")


def write_potential_grid(path: Path, V: PotentialGrid) -> Path:
    """1D: columns x, V. 2D: n rows of n values, row index along the first lattice axis.

    The grid's d, n and V_plus (and period) go to a JSON sidecar so the file reads back
    without a run configuration.
    """
    if V.d == 1:
        path = write_csv(path, ["x", "V"], zip(V.nodes(), V.values))
    else:
        path = write_csv(path, [f"c{j}" for j in range(V.n)], V.values.tolist())
    write_json(sidecar_path(path), {"d": V.d, "n": V.n, "V_plus": V.v_plus, "period": V.period})
    return path


def read_potential_grid(
    path: Path, v_plus: Optional[float] = None, d: Optional[int] = None, period: Optional[float] = None
) -> PotentialGrid:
    """Read a potential CSV; sidecar values win, the arguments fill in when it is missing"""
    path = Path(path)
    meta: Dict[str, Any] = {}
    sidecar = sidecar_path(path)
    if sidecar.exists():
        try:
            meta = json.loads(sidecar.read_text())
        except (OSError, json.JSONDecodeError) as e:
            raise ConfigError(f"Malformed potential sidecar {sidecar}: {e}", field="potential_file")
    d = meta.get("d", d if d is not None else 2)
    v_plus = meta.get("V_plus", v_plus)
    period = meta.get("period", period if period is not None else 1.0)
    if v_plus is None:
        raise ConfigError(f"No V_plus for {path}: no sidecar and none configured", field="V_plus")
    try:
        with path.open(newline="") as f:
            rows = list(csv.reader(f))[1:]
    except OSError as e:
        raise ConfigError(f"Cannot read potential file {path}: {e}", field="potential_file")
    try:
        if d == 1:
            values = np.array([float(r[1]) for r in rows])
        else:
            values = np.array([[float(x) for x in r] for r in rows])
    except (ValueError, IndexError) as e:
        raise ConfigError(f"Malformed potential file {path}: {e}", field="potential_file")
    if "n" in meta and values.shape[0] != meta["n"]:
        raise ConfigError(
            f"Potential file {path} has {values.shape[0]} rows, sidecar says n = {meta['n']}",
            field="potential_file",
        )
    return PotentialGrid(d=d, n=values.shape[0], values=values, v_plus=v_plus, period=period)


def write_step_potential(path: Path, V: StepPotential) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(V.model_dump_json(indent=2) + "\n")
    logger.info(f"Wrote {path}")
    return path


def read_step_potential(path: Path) -> StepPotential:
    return StepPotential.model_validate_json(Path(path).read_text())


def write_eigenfunctions(path: Path, ef: EdgeEigenfunctions) -> Path:
    rows = zip(ef.x, ef.psi_alpha, ef.dpsi_alpha, ef.psi_beta, ef.dpsi_beta)
    return write_csv(path, ["x", "psi_alpha", "dpsi_alpha", "psi_beta", "dpsi_beta"], rows)


def read_csv_floats(path: Path) -> List[List[float]]:
    with Path(path).open(newline="") as f:
        rows = list(csv.reader(f))[1:]
    return [[float(x) if x else float("nan") for x in r] for r in rows]

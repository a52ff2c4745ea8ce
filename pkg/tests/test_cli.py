"""
Test suite for configuration loading, result files, plots, manifests and the command-line entry point
"""

import json
import os
from pathlib import Path

import numpy as np
import pytest
from unittest.mock import patch

from gapforge.bands.dispersion import DispersionTable
from gapforge.cli.config import BandsConfig, load_config, resolve_threads
from gapforge.cli.io import (
    fmt,
    read_csv_floats,
    read_potential_grid,
    read_step_potential,
    sidecar_path,
    write_csv,
    write_jsonl,
    write_potential_grid,
    write_step_potential,
)
from gapforge.cli.manifest import MANIFEST_NAME, RunManifest, load_manifest, sha256_file
from gapforge.cli.plots import plot_bands, plot_lattice_sweep, plot_potential, plot_potential_1d
from gapforge.driver.config import Optimize1DConfig, OptimizeConfig, SweepConfig
from gapforge.driver.sweeps import LatticePoint, LatticeSweep
from gapforge.errors import EXIT_CONFIG, ConfigError, EmptyGapError
from gapforge.hill1d.steps import StepPotential
from gapforge.lattice.bravais import SQUARE
from gapforge.lattice.kpoints import lattice_path
from gapforge.main import build_parser, main
from gapforge.operators.potential import PotentialGrid
from gapforge.utils.metrics import performance_metrics

TESTDATA = Path(__file__).resolve().parent.parent / "testdata"


@pytest.fixture
def table():
    ks = lattice_path(SQUARE, 2)
    energies = np.vstack([np.linspace(1.0, 2.0, len(ks)), np.linspace(3.0, 4.0, len(ks))])
    return DispersionTable(ks=ks, energies=energies, params=SQUARE, n=4)


def _write(tmp_path: Path, name: str, payload: dict) -> str:
    path = tmp_path / name
    path.write_text(json.dumps(payload, indent=2))
    return str(path)


class TestLoadConfig:
    """Test JSON and TOML run configurations"""

    def test_json_and_toml(self):
        """Test the shipped configurations"""
        assert isinstance(load_config("bands", str(TESTDATA / "bands_free_square.json")), BandsConfig)
        assert load_config("bands", str(TESTDATA / "bands_cosine_1d.toml")).dim == 1
        assert isinstance(load_config("optimize1d", str(TESTDATA / "optimize1d_m1.json")), Optimize1DConfig)
        cfg = load_config("optimize2d", str(TESTDATA / "optimize2d_small.toml"))
        assert isinstance(cfg, OptimizeConfig)
        assert cfg.kpoints.kind == "half_bz"
        assert isinstance(load_config("sweep", str(TESTDATA / "sweep_lattice_m1.json")), SweepConfig)
        assert load_config("sweep", str(TESTDATA / "sweep_contrast_1d.toml")).optimize1d.m == 2

    def test_overrides(self):
        """Test command-line overrides of seed and output directory"""
        overrides = {"seed": 5, "out": "x", "threads": None}
        cfg = load_config("optimize1d", str(TESTDATA / "optimize1d_m1.json"), overrides)
        assert cfg.seed == 5
        assert cfg.out == "x"
        assert cfg.threads is None

    def test_command_mismatch(self):
        """Test that a config for another command is rejected with its line"""
        with pytest.raises(ConfigError) as exc:
            load_config("bands", str(TESTDATA / "optimize1d_m1.json"))
        assert exc.value.field == "command"
        assert exc.value.line == 2
        assert exc.value.exit_code == EXIT_CONFIG

    def test_invalid_field_reports_line(self, tmp_path):
        """Test field name and line number of a validation error"""
        path = _write(tmp_path, "bad.json", {"command": "optimize1d", "m": 0})
        with pytest.raises(ConfigError) as exc:
            load_config("optimize1d", path)
        assert exc.value.field == "m"
        assert exc.value.line == 3

    def test_malformed_files(self, tmp_path):
        """Test JSON and TOML syntax errors and missing files"""
        bad_json = tmp_path / "bad.json"
        bad_json.write_text('{\n  "m": 1,\n  oops\n}')
        with pytest.raises(ConfigError) as exc:
            load_config("optimize1d", str(bad_json))
        assert exc.value.line == 3
        bad_toml = tmp_path / "bad.toml"
        bad_toml.write_text("m = = 1\n")
        with pytest.raises(ConfigError):
            load_config("optimize1d", str(bad_toml))
        with pytest.raises(ConfigError):
            load_config("optimize1d", str(tmp_path / "missing.json"))
        with pytest.raises(ConfigError):
            load_config("compile", None)

    def test_bands_consistency(self):
        """Test bands config cross-field checks"""
        with pytest.raises(ConfigError):
            load_config("bands", None, {"potential": "file"})
        with pytest.raises(ConfigError):
            load_config("bands", None, {"m": 3, "bands": 3})


class TestResolveThreads:
    """Test worker-count precedence"""

    def test_flag_wins(self):
        """Test that an explicit count beats the environment"""
        with patch.dict(os.environ, {"GAPFORGE_THREADS": "2"}):
            assert resolve_threads(3) == 3
        with pytest.raises(ConfigError):
            resolve_threads(0)

    def test_environment(self):
        """Test GAPFORGE_THREADS and its validation"""
        with patch.dict(os.environ, {"GAPFORGE_THREADS": "2"}):
            assert resolve_threads(None) == 2
        with patch.dict(os.environ, {"GAPFORGE_THREADS": "many"}):
            with pytest.raises(ConfigError):
                resolve_threads(None)
        with patch.dict(os.environ, {"GAPFORGE_THREADS": "0"}):
            with pytest.raises(ConfigError):
                resolve_threads(None)

    def test_core_count(self):
        """Test the fallback to the machine's core count"""
        with patch.dict(os.environ, {}, clear=True):
            with patch("gapforge.cli.config.os.cpu_count", return_value=6):
                assert resolve_threads(None) == 6


class TestResultFiles:
    """Test CSV, JSON-lines and potential files"""

    def test_fmt(self):
        """Test 12 significant digits and empty cells"""
        assert fmt(1.0 / 3.0) == "0.333333333333"
        assert fmt(np.float64(2.5)) == "2.5"
        assert fmt(None) == ""
        assert fmt(7) == "7"

    def test_csv(self, tmp_path):
        """Test header and numeric rows"""
        path = write_csv(tmp_path / "sub" / "t.csv", ["a", "b"], [(1.0, None), (0.5, 2.0)])
        assert path.read_text().splitlines()[0] == "a,b"
        rows = read_csv_floats(path)
        assert rows[1] == [0.5, 2.0]
        assert np.isnan(rows[0][1])

    def test_jsonl_with_numpy(self, tmp_path):
        """Test one record per line with numpy scalars and arrays"""
        path = write_jsonl(tmp_path / "trace.jsonl", [{"G": np.float64(0.5)}, {"v": np.arange(2)}])
        lines = path.read_text().splitlines()
        assert [json.loads(line) for line in lines] == [{"G": 0.5}, {"v": [0, 1]}]

    def test_potential_grid_file(self, tmp_path):
        """Test writing and reading a 2D potential"""
        V = PotentialGrid(d=2, n=4, values=np.arange(16.0).reshape(4, 4) / 15.0, v_plus=1.0)
        W = read_potential_grid(write_potential_grid(tmp_path / "V.csv", V), 1.0)
        np.testing.assert_allclose(W.values, V.values, rtol=1e-11)

    def test_potential_sidecar(self, tmp_path):
        """Test that a saved potential describes itself through its JSON sidecar"""
        V = PotentialGrid(d=1, n=6, values=np.linspace(0.0, 40.0, 6), v_plus=50.0, period=2.0)
        path = write_potential_grid(tmp_path / "V.csv", V)
        meta = json.loads(sidecar_path(path).read_text())
        assert meta == {"d": 1, "n": 6, "V_plus": 50.0, "period": 2.0}
        W = read_potential_grid(path)
        assert (W.d, W.n, W.v_plus, W.period) == (1, 6, 50.0, 2.0)
        np.testing.assert_allclose(W.values, V.values, rtol=1e-11)

        sidecar_path(path).unlink()
        with pytest.raises(ConfigError):
            read_potential_grid(path)
        assert read_potential_grid(path, 60.0, d=1, period=2.0).v_plus == 60.0

    def test_potential_sidecar_mismatch(self, tmp_path):
        """Test that a sidecar disagreeing with the grid size is rejected"""
        V = PotentialGrid(d=2, n=4, values=np.zeros((4, 4)), v_plus=1.0)
        path = write_potential_grid(tmp_path / "V.csv", V)
        sidecar_path(path).write_text(json.dumps({"d": 2, "n": 8, "V_plus": 1.0}))
        with pytest.raises(ConfigError):
            read_potential_grid(path)

    def test_potential_file_errors(self, tmp_path):
        """Test missing and malformed potential files"""
        with pytest.raises(ConfigError):
            read_potential_grid(tmp_path / "missing.csv", 1.0)
        bad = tmp_path / "bad.csv"
        bad.write_text("c0,c1\n0.1,x\n0.2,0.3\n")
        with pytest.raises(ConfigError):
            read_potential_grid(bad, 1.0)

    def test_step_potential_file(self, tmp_path):
        """Test the JSON form of a step potential"""
        V = StepPotential.barrier(1.0, 0.3, 100.0)
        assert read_step_potential(write_step_potential(tmp_path / "V.json", V)) == V


class TestManifest:
    """Test the output inventory"""

    def test_hashes_and_mismatches(self, tmp_path):
        """Test recorded hashes and detection of modified outputs"""
        out = tmp_path / "run"
        a = write_csv(out / "a.csv", ["x"], [(1.0,)])
        b = write_csv(out / "b.csv", ["x"], [(2.0,)])
        manifest = RunManifest(command="bands", config={"n": 4}, seeds=[0], threads=1)
        manifest.add(a, out)
        manifest.add(b, out)
        manifest.finish(out, 0, {"total_operations": 0})

        loaded = load_manifest(out)
        assert loaded.exit_code == 0
        assert [e.path for e in loaded.outputs] == ["a.csv", "b.csv"]
        assert loaded.outputs[0].sha256 == sha256_file(a)
        assert loaded.mismatches(out) == []
        b.write_text("x\n3\n")
        assert loaded.mismatches(out) == ["b.csv"]
        assert (out / MANIFEST_NAME).exists()


class TestPlots:
    """Test SVG figures"""

    def test_bands_svg_is_reproducible(self, tmp_path, table):
        """Test that identical input gives identical bytes"""
        first = plot_bands(tmp_path / "a.svg", table, 1)
        second = plot_bands(tmp_path / "b.svg", table, 1)
        assert first.read_text().lstrip().startswith("<?xml")
        assert sha256_file(first) == sha256_file(second)

    def test_potential_plots(self, tmp_path):
        """Test 2D and 1D potential figures"""
        V = PotentialGrid.from_mask(np.eye(8, dtype=bool), 5.0)
        assert plot_potential(tmp_path / "V.svg", V, SQUARE).stat().st_size > 0
        step = StepPotential.barrier(1.0, 0.3, 100.0)
        assert plot_potential_1d(tmp_path / "V1.svg", step).stat().st_size > 0
        assert plot_potential_1d(tmp_path / "V2.svg", step.to_grid(32)).stat().st_size > 0

    def test_lattice_sweep_without_successes(self, tmp_path):
        """Test a lattice sweep figure where every point failed"""
        sweep = LatticeSweep(m=1, V_plus=100.0, points=[LatticePoint(a=0.0, b=1.0, status="failed", error="x")])
        assert plot_lattice_sweep(tmp_path / "L.svg", sweep).exists()


class TestMain:
    """Test the gapforge entry point"""

    def test_parser(self):
        """Test required and optional arguments"""
        parser = build_parser()
        args = parser.parse_args(["verify", "--only", "1d", "--only", "numerics"])
        assert args.only == ["1d", "numerics"]
        with pytest.raises(SystemExit):
            parser.parse_args(["bands"])
        with pytest.raises(SystemExit):
            parser.parse_args(["bands", "--config", "x.json", "--threads", "two"])

    def test_missing_gap_index(self, tmp_path, capsys):
        """Test exit code 2 and the JSON error payload"""
        path = _write(tmp_path, "cfg.json", {"command": "optimize1d"})
        assert main(["optimize1d", "--config", path, "--out", str(tmp_path / "out")]) == 2
        lines = [l for l in capsys.readouterr().err.splitlines() if l.startswith("{")]
        payload = json.loads(lines[-1])
        assert payload["error"] == "ConfigError"
        assert payload["field"] == "m"

    def test_empty_contrast_list(self, tmp_path):
        """Test that an empty contrast sweep is a config error"""
        payload = {"command": "sweep", "kind": "contrast", "dim": 1, "Vp_list": [], "optimize1d": {"m": 1}}
        path = _write(tmp_path, "cfg.json", payload)
        assert main(["sweep", "--config", path]) == 2

    def test_bad_thread_count(self):
        """Test rejection of a nonpositive --threads"""
        assert main(["bands", "--config", str(TESTDATA / "bands_free_square.json"), "--threads", "0"]) == 2

    @pytest.mark.integration
    def test_bands_free_square(self, tmp_path):
        """Test the bands command on the free square lattice"""
        out = tmp_path / "bands"
        config = str(TESTDATA / "bands_free_square.json")
        code = main(["bands", "--config", config, "--out", str(out), "--threads", "1"])
        assert code == 0
        for name in ("dispersion.csv", "potential.csv", "potential.json", "report.json", "bands.svg", "potential.svg", "metrics.json", MANIFEST_NAME):
            assert (out / name).exists()
        report = json.loads((out / "report.json").read_text())
        assert report["sampling"] == "ibz_square"
        assert "free_band_deviation" in report
        assert load_manifest(out).mismatches(out) == []

    @pytest.mark.integration
    def test_metrics_cover_one_run(self, tmp_path):
        """Test that metrics.json holds only the timings of its own command"""
        performance_metrics.end_timer(performance_metrics.start_timer("earlier_run"))
        out = tmp_path / "bands"
        config = str(TESTDATA / "bands_free_square.json")
        assert main(["bands", "--config", config, "--out", str(out), "--threads", "1"]) == 0
        exported = json.loads((out / "metrics.json").read_text())
        operations = {m["operation"] for m in exported["metrics"]}
        assert "earlier_run" not in operations
        assert "metrics.json" in [entry.path for entry in load_manifest(out).outputs]

    @pytest.mark.integration
    def test_bands_1d(self, tmp_path):
        """Test the bands command for a 1D step potential"""
        out = tmp_path / "bands1d"
        assert main(["bands", "--config", str(TESTDATA / "bands_cosine_1d.toml"), "--out", str(out)]) == 0
        rows = read_csv_floats(out / "dispersion.csv")
        assert len(rows) == 33

    @pytest.mark.integration
    def test_optimize1d(self, tmp_path):
        """Test the 1D optimizer command end to end"""
        out = tmp_path / "opt1d"
        assert main(["optimize1d", "--config", str(TESTDATA / "optimize1d_m1.json"), "--out", str(out)]) == 0
        report = json.loads((out / "report.json").read_text())
        assert report["G"] == pytest.approx(1.12370, abs=1e-3)
        assert report["certificate"]["applicable"]
        assert (out / "eigenfunctions.csv").exists()
        assert read_step_potential(out / "potential.json").transitions() == 2

    @pytest.mark.integration
    def test_optimize1d_budget(self, tmp_path, capsys):
        """Test that an exhausted iteration budget exits 3 and still writes results"""
        cfg = json.loads((TESTDATA / "optimize1d_m1.json").read_text())
        cfg["max_iters"] = 1
        path = tmp_path / "budget.json"
        path.write_text(json.dumps(cfg))
        out = tmp_path / "budget"
        assert main(["optimize1d", "--config", str(path), "--out", str(out)]) == 3
        lines = [l for l in capsys.readouterr().err.splitlines() if l.startswith("{")]
        payload = json.loads(lines[-1])
        assert payload["error"] == "BudgetExhaustedError"
        assert payload["exit_code"] == 3
        assert load_manifest(out).exit_code == 3
        assert (out / "report.json").exists()

    @pytest.mark.integration
    def test_optimize2d_small(self, tmp_path):
        """Test the 2D optimizer command on an 8x8 grid"""
        out = tmp_path / "opt2d"
        code = main(["optimize2d", "--config", str(TESTDATA / "optimize2d_small.toml"), "--out", str(out)])
        assert code in (0, 3)
        report = json.loads((out / "report.json").read_text())
        assert load_manifest(out).exit_code == code
        assert len((out / "trace.jsonl").read_text().splitlines()) >= 2
        assert "kkt" in report

    @pytest.mark.slow
    @pytest.mark.integration
    def test_sweep_contrast_1d(self, tmp_path):
        """Test a 1D contrast sweep through the entry point"""
        out = tmp_path / "sweep"
        assert main(["sweep", "--config", str(TESTDATA / "sweep_contrast_1d.toml"), "--out", str(out)]) == 0
        rows = (out / "contrast_sweep.csv").read_text().splitlines()
        assert rows[0].startswith("lattice,V_plus,G")
        assert len(rows) == 5
        report = json.loads((out / "report.json").read_text())
        assert report["1d"]["m"] == 2

    def test_sweep_failed_points(self, tmp_path):
        """Test that failed contrast points become rows and only a fully failed sweep exits 4"""
        config = str(TESTDATA / "sweep_contrast_1d.toml")
        with patch("gapforge.driver.sweeps.optimize_1d", side_effect=EmptyGapError("gap closed")):
            assert main(["sweep", "--config", config, "--out", str(tmp_path / "all")]) == 4
        rows = (tmp_path / "all" / "contrast_sweep.csv").read_text().splitlines()
        assert len(rows) == 5
        assert all(",failed," in row and row.endswith("gap closed") for row in rows[1:])
        report = json.loads((tmp_path / "all" / "report.json").read_text())
        assert report["1d"]["failed"] == 4
        assert report["1d"]["threshold"] is None
        assert load_manifest(tmp_path / "all").exit_code == 4

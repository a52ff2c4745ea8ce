"""
Test suite for the built-in acceptance checks
"""

import json

import pytest
from unittest.mock import patch

from gapforge.bands.bounds import BesselZeroTable
from gapforge.cli.config import VerifyConfig
from gapforge.cli.manifest import load_manifest
from gapforge.cli.verify import (
    Check,
    check_disk_union,
    check_equal_intervals,
    check_high_contrast_g,
    check_kp_vs_transfer,
    check_lattice_reduction,
    check_weyl_decay,
    checks,
    cmd_verify,
    format_table,
    run_checks,
)
from gapforge.main import main


def _passing():
    return True, 1.0, 1.0, "ok"


def _failing():
    return False, 0.5, 1.0, "too small"


def _raising():
    raise RuntimeError("boom")


@pytest.fixture
def fake_suite():
    return [
        Check("good", "1d", _passing),
        Check("bad", "2d", _failing),
        Check("broken", "numerics", _raising),
        Check("long", "2d", _passing, full_only=True),
    ]


class TestSuite:
    """Test the registered checks"""

    def test_names_and_groups(self):
        """Test unique names, known groups and the long-running set"""
        suite = checks()
        names = [c.name for c in suite]
        assert len(names) == len(set(names))
        assert {c.group for c in suite} == {"1d", "2d", "numerics"}
        full = {c.name for c in suite if c.full_only}
        assert full == {
            "optimal_ratio_square_m1", "optimal_ratio_triangular_m1", "optimal_ratio_square_m2", "disk_array_limit",
            "unequal_disks", "contrast_threshold_m3", "lattice_ranking_m1", "lattice_ranking_m2",
        }
        assert {"small_sdp_kkt", "embedding_1d", "convergence_order", "certificate_m3"} <= set(names)

    @pytest.mark.parametrize(
        "check",
        [check_high_contrast_g, check_disk_union, check_equal_intervals, check_kp_vs_transfer,
         check_lattice_reduction, check_weyl_decay],
    )
    def test_fast_checks_pass(self, check):
        """Test the closed-form and lightweight checks"""
        passed, _, _, detail = check()
        assert passed, detail

    def test_unpolished_bessel_zeros_fail(self):
        """Test that inaccurate Bessel zeros fail the high-contrast check"""
        with patch("gapforge.cli.verify.default_bessel_zeros", return_value=BesselZeroTable()):
            passed, _, _, _ = check_high_contrast_g()
        assert not passed


class TestRunner:
    """Test filtering, error capture and the report"""

    def test_errors_become_failed_rows(self, fake_suite):
        """Test that a raising check is recorded and the run continues"""
        with patch("gapforge.cli.verify.checks", return_value=fake_suite):
            rows = run_checks(VerifyConfig())
        assert [r.name for r in rows] == ["good", "bad", "broken"]
        assert [r.passed for r in rows] == [True, False, False]
        assert "RuntimeError: boom" in rows[2].detail
        assert "1/3 checks passed" in format_table(rows)

    def test_group_filter_and_full(self, fake_suite):
        """Test --only groups and the long-running checks"""
        with patch("gapforge.cli.verify.checks", return_value=fake_suite):
            assert [r.name for r in run_checks(VerifyConfig(only=["2d"]))] == ["bad"]
            assert [r.name for r in run_checks(VerifyConfig(only=["2d"], full=True))] == ["bad", "long"]

    def test_exit_codes_and_files(self, fake_suite, tmp_path, capsys):
        """Test exit codes, written reports and the printed table"""
        with patch("gapforge.cli.verify.checks", return_value=fake_suite):
            assert cmd_verify(VerifyConfig(only=["1d"], out=str(tmp_path / "ok")), 1) == 0
            assert cmd_verify(VerifyConfig(out=str(tmp_path / "bad")), 1) == 4
        assert "PASS" in capsys.readouterr().out
        rows = json.loads((tmp_path / "bad" / "verify.json").read_text())
        assert len(rows) == 3
        assert (tmp_path / "ok" / "verify.csv").exists()
        assert load_manifest(tmp_path / "bad").exit_code == 4

    def test_no_rows_fails(self, fake_suite, tmp_path):
        """Test that an empty selection does not count as success"""
        with patch("gapforge.cli.verify.checks", return_value=fake_suite[:1]):
            assert cmd_verify(VerifyConfig(only=["numerics"], out=str(tmp_path)), 1) == 4

    def test_main_only_flag(self, fake_suite, tmp_path):
        """Test the verify command through the entry point"""
        with patch("gapforge.cli.verify.checks", return_value=fake_suite):
            code = main(["verify", "--only", "1d", "--out", str(tmp_path), "--threads", "1"])
        assert code == 0

    @pytest.mark.slow
    def test_numerics_group(self, tmp_path):
        """Test the real numerics group end to end"""
        rows = run_checks(VerifyConfig(only=["numerics"]))
        assert [r.name for r in rows] == ["kp_vs_transfer", "convergence_order", "band_symmetry", "lattice_reduction"]
        assert all(r.passed for r in rows), format_table(rows)

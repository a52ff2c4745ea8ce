"""
Test suite for dispersion tables, analytic bounds and band checks
"""

import math

import numpy as np
import pytest

from gapforge.bands.bounds import (
    BesselZeroTable,
    default_bessel_zeros,
    disk_union_gap,
    high_contrast_g,
    laplace_bounds,
    ratio_gap,
    upper_bound_1d,
    upper_bound_2d,
)
from gapforge.bands.checks import extrema_location_check, symmetry_check
from gapforge.bands.dispersion import DispersionTable, dispersion, free_bands, gap_ratio, gap_report
from gapforge.errors import InvalidParamsError
from gapforge.lattice.bravais import SQUARE, LatticeParams, basis_from_params
from gapforge.lattice.kpoints import KSampling, full_bz_grid, half_bz_grid, lattice_path, line_1d
from gapforge.operators.potential import PotentialGrid


@pytest.fixture
def generic():
    return LatticeParams(a=0.3, b=1.2)


@pytest.fixture
def random_potential():
    rng = np.random.default_rng(7)
    return PotentialGrid(d=2, n=10, values=rng.uniform(0.0, 10.0, (10, 10)), v_plus=10.0)


def _table(energies, points=None):
    energies = np.asarray(energies, dtype=float)
    if points is None:
        points = np.column_stack([np.arange(energies.shape[1]), np.zeros(energies.shape[1])])
    return DispersionTable(ks=KSampling(points=points), energies=energies, params=SQUARE, n=4)


class TestGapRatio:
    """Test the gap-to-midgap ratio"""

    def test_values(self):
        """Test open, closed and limiting gaps"""
        assert gap_ratio(1.0, 3.0) == pytest.approx(1.0)
        assert gap_ratio(3.0, 1.0) == 0.0
        assert gap_ratio(2.0, 2.0) == 0.0
        assert gap_ratio(0.0, 1.0) == 2.0

    def test_gap_report(self):
        """Test edges and their k indices"""
        report = gap_report(_table([[1.0, 2.0], [3.0, 4.0]]), 1)
        assert (report.alpha, report.beta) == (2.0, 3.0)
        assert report.G == pytest.approx(0.4)
        assert (report.argmax_k, report.argmin_k) == (1, 0)
        assert report.is_open

    def test_gap_report_needs_bands(self):
        """Test that gap m needs m + 1 bands"""
        with pytest.raises(InvalidParamsError):
            gap_report(_table([[1.0, 2.0], [3.0, 4.0]]), 2)


class TestDispersion:
    """Test band computation over k samplings"""

    def test_free_square_bands(self):
        """Test V = 0 bands against |k + g|^2 along the square path"""
        ks = lattice_path(SQUARE, 4)
        table = dispersion(PotentialGrid.constant(2, 16, 0.0, 0.0), SQUARE, ks, 4)
        exact = free_bands(ks, 4, p=SQUARE)
        np.testing.assert_allclose(table.energies, exact, rtol=0.03, atol=1e-8)
        assert table.bands == 4

    def test_free_bands_1d(self):
        """Test the exact free bands at k = 0"""
        ks = line_1d(1.0, 3)
        exact = free_bands(ks, 3, X=1.0)
        np.testing.assert_allclose(exact[:, 1], [0.0, 4 * math.pi**2, 4 * math.pi**2], atol=1e-9)

    def test_threads_do_not_change_results(self, random_potential, generic):
        """Test that parallel and serial sweeps agree"""
        ks = half_bz_grid(basis_from_params(generic), 2)
        serial = dispersion(random_potential, generic, ks, 3)
        parallel = dispersion(random_potential, generic, ks, 3, threads=2)
        np.testing.assert_allclose(serial.energies, parallel.energies, atol=1e-12)

    def test_band_count(self, random_potential):
        """Test the minimum band count"""
        with pytest.raises(InvalidParamsError):
            dispersion(random_potential, SQUARE, half_bz_grid(np.eye(2), 1), 1)

    def test_2d_needs_lattice(self, random_potential):
        """Test that 2D dispersions need lattice parameters"""
        with pytest.raises(InvalidParamsError):
            dispersion(random_potential, None, half_bz_grid(np.eye(2), 1), 2)


class TestBounds:
    """Test closed-form bounds and high-contrast limits"""

    def test_upper_bound_1d(self):
        """Test the 1D bound at X = 1, V+ = 100"""
        assert upper_bound_1d(1, 1.0, 100.0) == pytest.approx(1.6703, abs=1e-4)
        assert upper_bound_1d(1, 1.0, 0.0) == 0.0
        with pytest.raises(InvalidParamsError):
            upper_bound_1d(0, 1.0, 1.0)

    def test_ratio_gap(self):
        """Test f(4) = 6/5"""
        assert ratio_gap(4.0) == pytest.approx(1.2)
        assert ratio_gap(1.0) == 0.0

    def test_high_contrast_g(self):
        """Test the disk limit constant"""
        assert high_contrast_g() == pytest.approx(0.869652, abs=1e-6)

    def test_bessel_table_is_polished(self):
        """Test that the default zeros are accurate roots"""
        assert max(default_bessel_zeros().residuals()) < 1e-12
        assert max(BesselZeroTable().residuals()) > 1e-6

    def test_disk_union_gap(self):
        """Test equal and unequal disk radii"""
        g = high_contrast_g()
        assert disk_union_gap([0.2, 0.2]) == pytest.approx(g)
        assert disk_union_gap([0.15, 0.2]) < g
        assert disk_union_gap([0.05, 0.2]) == 0.0
        with pytest.raises(InvalidParamsError):
            disk_union_gap([0.2, -0.1])

    def test_laplace_bounds(self):
        """Test Neumann and Dirichlet ground states on the unit square"""
        lb = laplace_bounds(SQUARE, 16, 2)
        assert lb.lambda_N[0] == pytest.approx(0.0, abs=1e-9)
        assert lb.lambda_D[0] == pytest.approx(2 * math.pi**2, rel=0.02)

    def test_upper_bound_2d(self, generic):
        """Test range and argument checks of the 2D bound"""
        value = upper_bound_2d(1, generic, 100.0, n=16)
        assert 0.0 < value <= 2.0
        with pytest.raises(InvalidParamsError):
            upper_bound_2d(0, SQUARE, 100.0)


class TestBandChecks:
    """Test symmetry and extrema-location checks"""

    def test_inversion_symmetry(self, random_potential, generic):
        """Test E_j(k) = E_j(-k) for a real potential"""
        table = dispersion(random_potential, generic, full_bz_grid(basis_from_params(generic), 3), 3)
        assert symmetry_check(table) < 1e-8

    def test_sampling_must_be_closed(self, random_potential):
        """Test that a half grid is not closed under k -> -k"""
        table = dispersion(random_potential, SQUARE, half_bz_grid(np.eye(2), 3), 2)
        with pytest.raises(InvalidParamsError):
            symmetry_check(table)

    def test_extrema_on_path(self):
        """Test agreement and disagreement of path and full-zone edges"""
        path = _table([[1.0, 2.0], [3.0, 4.0]])
        same = extrema_location_check(_table([[1.0, 2.0, 1.5], [3.0, 4.0, 3.5]]), path, 1)
        assert same.on_boundary
        off = extrema_location_check(_table([[1.0, 2.0, 2.5], [3.0, 4.0, 3.5]]), path, 1)
        assert not off.on_boundary
        assert off.offending_k == 2

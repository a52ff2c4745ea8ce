"""
Test suite for 1D step potentials, discriminants, rearrangement and certificates
"""

import math

import numpy as np
import pytest

from gapforge.driver.initial import cosine_step
from gapforge.errors import DegenerateInputError, EmptyGapError, InvalidParamsError
from gapforge.hill1d.certificates import (
    dirichlet_union_spectrum,
    equal_interval_high_contrast,
    high_contrast_limit_1d,
    kp_gap_ratio,
    optimal_b_search,
    verify_1d_certificates,
)
from gapforge.hill1d.kronig_penney import (
    kp_discriminant,
    kp_gap_edges,
    step_discriminant,
    step_gap_edges,
    transfer_matrix_spectrum,
)
from gapforge.hill1d.rearrange import gap_of, optimize_1d, rearrange_step_1d, set_difference
from gapforge.hill1d.steps import StepPotential, periodic_extension, scaled_contrast, symmetric_difference
from gapforge.hill1d.transfer import count_zeros, edge_eigenfunctions
from gapforge.operators.stencil import assemble_bloch_1d


@pytest.fixture
def barrier():
    return StepPotential.barrier(1.0, 0.3, 100.0)


@pytest.fixture(scope="module")
def optimum_m1():
    return optimize_1d(StepPotential.barrier(1.0, 0.8, 100.0), 1)


class TestStepPotential:
    """Test canonical step potentials and their geometry"""

    def test_canonical_merges_neighbours(self):
        """Test sorting and cyclic merging of equal values"""
        V = StepPotential.canonical(1.0, [0.0, 0.5, 0.2], [1.0, 1.0, 0.0], 1.0)
        assert V.breakpoints == [0.2, 0.5]
        assert V.values == [0.0, 1.0]

    def test_non_canonical_rejected(self):
        """Test that equal adjacent values are rejected"""
        with pytest.raises(ValueError):
            StepPotential(X=1.0, breakpoints=[0.0, 0.5], values=[1.0, 1.0], V_plus=1.0)

    def test_barrier(self, barrier):
        """Test barrier fraction, transitions and bang-bang form"""
        assert barrier.barrier_fraction() == pytest.approx(0.3)
        assert barrier.transitions() == 2
        assert barrier.is_bang_bang()
        assert not StepPotential.canonical(1.0, [0.0, 0.5], [50.0, 0.0], 100.0).is_bang_bang()

    def test_wrapped_barrier(self):
        """Test a barrier that wraps around the period"""
        V = StepPotential.barrier(1.0, 0.3, 100.0, start=0.9)
        assert V.upper_measure() == pytest.approx(0.3)
        np.testing.assert_allclose(V.value_at([0.1, 0.5, 0.95]), [100.0, 0.0, 100.0])

    def test_barrier_out_of_range(self):
        """Test the barrier length range"""
        with pytest.raises(InvalidParamsError):
            StepPotential.barrier(1.0, 1.5, 100.0)

    def test_value_at_and_grid(self, barrier):
        """Test pointwise values and sampling onto a grid"""
        np.testing.assert_allclose(barrier.value_at([0.1, 0.5, 1.1]), [100.0, 0.0, 100.0])
        grid = barrier.to_grid(10)
        assert grid.values.sum() == pytest.approx(300.0)
        assert grid.period == 1.0

    def test_shift_and_symmetric_difference(self, barrier):
        """Test the measure of the symmetric difference of upper sets"""
        assert symmetric_difference(barrier, barrier) == 0.0
        assert symmetric_difference(barrier, barrier.shifted(0.5)) == pytest.approx(0.6)

    def test_periodic_extension(self, barrier):
        """Test compression into X/m and repetition"""
        tiled = periodic_extension(barrier, 2)
        np.testing.assert_allclose(tiled.breakpoints, [0.0, 0.15, 0.5, 0.65])
        assert tiled.transitions() == 4
        assert tiled.barrier_fraction() == pytest.approx(0.3)

    def test_scaled_contrast(self, barrier):
        """Test scaling of values and V+"""
        V = scaled_contrast(barrier, 2.0)
        assert V.V_plus == 200.0
        assert V.values == [200.0, 0.0]


class TestDiscriminant:
    """Test closed-form and transfer-matrix discriminants"""

    def test_free_discriminant(self):
        """Test D(pi^2) = -1 without a barrier"""
        assert kp_discriminant(math.pi**2, 0.3, 1.0, 0.0) == pytest.approx(-1.0)

    def test_closed_form_matches_transfer(self, barrier):
        """Test that both discriminants agree on a barrier"""
        E = np.array([1.0, 10.0, 50.0, 150.0])
        expected = kp_discriminant(E, 0.3, 1.0, 100.0)
        np.testing.assert_allclose(step_discriminant(barrier, E), expected, rtol=1e-9, atol=1e-9)

    def test_rejects_degenerate_inputs(self):
        """Test negative energies and barriers longer than the period"""
        with pytest.raises(DegenerateInputError):
            kp_discriminant(-1.0, 0.3, 1.0, 100.0)
        with pytest.raises(DegenerateInputError):
            kp_discriminant(1.0, 1.3, 1.0, 100.0)
        with pytest.raises(DegenerateInputError):
            kp_gap_edges(1.3, 1.0, 100.0, 1)

    @pytest.mark.parametrize("m", [1, 2, 3])
    def test_gap_edges_agree(self, barrier, m):
        """Test closed-form and transfer-matrix gap edges"""
        kp = np.array(kp_gap_edges(0.3, 1.0, 100.0, m))
        tm = np.array(step_gap_edges(barrier, m))
        np.testing.assert_allclose(tm, kp, rtol=1e-9)
        assert kp[0] < kp[1]

    def test_free_spectrum(self):
        """Test the free spectrum at k = pi/2"""
        values = transfer_matrix_spectrum(StepPotential.constant(1.0, 0.0, 1.0), math.pi / 2, 3)
        np.testing.assert_allclose(values, [math.pi**2 / 4, 9 * math.pi**2 / 4, 25 * math.pi**2 / 4], rtol=1e-9)

    def test_spectrum_matches_finite_differences(self, barrier):
        """Test transfer-matrix eigenvalues against a fine FD discretization"""
        exact = transfer_matrix_spectrum(barrier, 0.5, 3)
        H = assemble_bloch_1d(1.0, 0.5, barrier.to_grid(1000))
        fd = np.linalg.eigvalsh(H.to_dense())[:3]
        np.testing.assert_allclose(fd, exact, rtol=1e-2)

    def test_k_outside_zone(self, barrier):
        """Test the quasi-momentum range"""
        with pytest.raises(InvalidParamsError):
            transfer_matrix_spectrum(barrier, 4.0, 2)


class TestEdgeEigenfunctions:
    """Test the analytic eigenfunctions at the gap edges"""

    @pytest.mark.parametrize("m", [1, 2])
    def test_normalized_and_bloch_periodic(self, barrier, m):
        """Test unit norm and psi(X) = rho psi(0) by continuity"""
        ef = edge_eigenfunctions(barrier, m)
        assert ef.periodic == (m % 2 == 0)
        assert np.mean(ef.psi_alpha**2) == pytest.approx(1.0, rel=1e-3)
        assert np.mean(ef.psi_beta**2) == pytest.approx(1.0, rel=1e-3)
        psi, _ = ef.sol_alpha.evaluate(np.array([1.0 - 1e-10, 1.0]))
        assert psi[0] == pytest.approx(psi[1], abs=1e-6)

    @pytest.mark.parametrize("m", [1, 2])
    def test_zero_counts(self, barrier, m):
        """Test that both edge eigenfunctions of gap m change sign m times"""
        ef = edge_eigenfunctions(barrier, m)
        assert count_zeros(ef.sol_alpha) == m
        assert count_zeros(ef.sol_beta) == m

    def test_too_few_samples(self, barrier):
        """Test the sample count minimum"""
        with pytest.raises(InvalidParamsError):
            edge_eigenfunctions(barrier, 1, samples=8)


class TestRearrangement:
    """Test the rearrangement step and the 1D optimizer"""

    def test_step_does_not_decrease_gap(self):
        """Test monotonicity of one rearrangement step"""
        V = StepPotential.barrier(1.0, 0.8, 100.0)
        _, _, G = gap_of(V, 1)
        W = rearrange_step_1d(V, 1)
        _, _, G_new = gap_of(W, 1)
        assert G_new >= G - 1e-10
        assert W.is_bang_bang()
        assert set_difference(V, W) > 0

    def test_empty_gap(self):
        """Test that a closed gap cannot be rearranged"""
        V = StepPotential.constant(1.0, 0.0, 100.0)
        _, _, G = gap_of(V, 1)
        assert G == pytest.approx(0.0, abs=1e-6)
        with pytest.raises(EmptyGapError):
            rearrange_step_1d(V, 1)

    def test_invalid_gap_index(self, barrier):
        """Test rejection of m < 1"""
        with pytest.raises(InvalidParamsError):
            rearrange_step_1d(barrier, 0)

    def test_optimum_from_long_barrier(self, optimum_m1):
        """Test the optimal gap and barrier geometry for m = 1"""
        assert optimum_m1.status == "stationary"
        assert optimum_m1.iterations <= 15
        assert optimum_m1.best.G == pytest.approx(1.12370, abs=1e-3)
        assert optimum_m1.best.potential.barrier_fraction() == pytest.approx(0.42, abs=0.01)
        assert optimum_m1.best.to_dict()["transitions"] == 2

    def test_history_is_monotone(self, optimum_m1):
        """Test that the recorded ratios never decrease"""
        G = [it.G for it in optimum_m1.history]
        assert all(b >= a - 1e-10 for a, b in zip(G, G[1:]))
        assert optimum_m1.history[0].change is None

    def test_max_iters(self, barrier):
        """Test the iteration budget"""
        with pytest.raises(InvalidParamsError):
            optimize_1d(barrier, 1, max_iters=0)
        assert optimize_1d(StepPotential.barrier(1.0, 0.8, 100.0), 1, max_iters=1).status == "budget"

    @pytest.mark.slow
    @pytest.mark.parametrize(
        "m, expected", [(1, 1.12370), (2, 0.74391), (3, 0.46766), (4, 0.30895), (5, 0.21550)]
    )
    def test_optimal_ratios(self, m, expected):
        """Test optimal G_m at X = 1, V+ = 100"""
        result = optimize_1d(cosine_step(1.0, m, 100.0), m)
        assert result.best.G == pytest.approx(expected, abs=1e-3)

    @pytest.mark.slow
    def test_grid_optimizer(self):
        """Test the finite-difference representation of the optimizer"""
        result = optimize_1d(StepPotential.barrier(1.0, 0.8, 100.0).to_grid(128), 1)
        assert result.best.G == pytest.approx(1.1237, abs=0.03)


class TestCertificates:
    """Test optimality certificates and closed-form checks"""

    def test_optimum_passes(self, optimum_m1):
        """Test the certificates at the m = 1 optimum"""
        cert = verify_1d_certificates(optimum_m1.best.potential, 1)
        assert cert.applicable
        assert cert.passes
        assert cert.bang_bang_fraction >= 0.999
        assert cert.G <= cert.upper_bound

    def test_empty_gap_not_applicable(self):
        """Test that certificates do not apply to closed gaps"""
        cert = verify_1d_certificates(StepPotential.constant(1.0, 0.0, 100.0), 1)
        assert not cert.applicable
        assert not cert.passes

    def test_optimal_barrier(self):
        """Test the single-barrier search against the m = 1 optimum"""
        b_star, G_star = optimal_b_search(1.0, 100.0)
        assert b_star == pytest.approx(0.42, abs=0.01)
        assert G_star == pytest.approx(1.12370, abs=1e-3)
        assert kp_gap_ratio(b_star, 1.0, 100.0) == pytest.approx(G_star)

    def test_low_contrast_barrier(self):
        """Test that b* tends to X/2 as V+ tends to zero"""
        b_star, _ = optimal_b_search(1.0, 1e-3)
        assert b_star == pytest.approx(0.5, abs=1e-2)

    def test_equal_intervals(self):
        """Test 6/5 for equal wells and less for unequal ones"""
        for m in (1, 2, 3):
            assert equal_interval_high_contrast(m) == pytest.approx(1.2, abs=1e-12)
        assert equal_interval_high_contrast(2, [0.4, 0.6]) == pytest.approx(0.56)
        assert high_contrast_limit_1d() == pytest.approx(1.2)
        with pytest.raises(InvalidParamsError):
            equal_interval_high_contrast(2, [1.0])

    def test_dirichlet_union(self):
        """Test the merged Dirichlet spectra"""
        np.testing.assert_allclose(
            dirichlet_union_spectrum([1.0, 0.5], 3), [math.pi**2, 4 * math.pi**2, 4 * math.pi**2]
        )
        with pytest.raises(InvalidParamsError):
            dirichlet_union_spectrum([1.0, 0.0], 2)

    def test_periodic_extension_gap(self, barrier):
        """Test G_2 of a tiled barrier against G_1 at a quarter of the contrast"""
        tiled = periodic_extension(barrier, 2)
        _, _, G2 = gap_of(tiled, 2)
        _, _, G1 = gap_of(StepPotential.barrier(1.0, 0.3, 25.0), 1)
        _, _, first = gap_of(tiled, 1)
        assert G2 == pytest.approx(G1, abs=1e-8)
        assert first == pytest.approx(0.0, abs=1e-12)

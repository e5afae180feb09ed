"""Energy functional, stationary-state residuals and the minimizer."""

import numpy as np
import pytest

from becbdg import groundstate as gs
from becbdg import spectral as sp
from becbdg.exceptions import ConvergenceError
from conftest import free_params, jj_params, nojj_params


@pytest.fixture(scope="module")
def grid64():
    return sp.make_grid(1, 16, 64)


def unit_gaussian(grid):
    g = np.exp(-0.5 * grid.points_1d**2)
    return g / sp.norm(grid, g)


class TestEnergy:
    def test_free_gaussian_pair(self, grid64):
        # harmonic trap ground energy is d/2 per unit mass
        params = free_params(alpha=0.2)
        g = unit_gaussian(grid64)
        phi = np.stack([np.sqrt(0.2) * g, np.sqrt(0.8) * g])
        assert gs.energy(grid64, phi, params) == pytest.approx(0.5, abs=1e-12)

    def test_detuning_shift(self, grid64):
        # the detuning term integrates to delta*(2*alpha - 1)/2
        params = gs.PhysParams(0, 0, 0, rabi=0.0, raman=0.4, gamma=(1.0,), alpha=0.2)
        g = unit_gaussian(grid64)
        phi = np.stack([np.sqrt(0.2) * g, np.sqrt(0.8) * g])
        assert gs.energy(grid64, phi, params) == pytest.approx(0.38, abs=1e-12)

    def test_rabi_term(self, grid64):
        params = gs.PhysParams(0, 0, 0, rabi=1.0, raman=0.0, gamma=(1.0,))
        g = unit_gaussian(grid64)
        phi = np.stack([g, g]) / np.sqrt(2.0)
        assert gs.energy(grid64, phi, params) == pytest.approx(1.0, abs=1e-12)

    def test_complex_input_accepted(self, grid64):
        params = jj_params()
        g = unit_gaussian(grid64).astype(complex)
        phi = np.stack([g, -g]) / np.sqrt(2.0)
        val = gs.energy(grid64, phi, params)
        assert np.isreal(val) and np.isfinite(val)

    def test_virial_balance_free_case(self, grid64):
        # for the exact harmonic ground state, kinetic == potential energy
        g = unit_gaussian(grid64)
        kinetic = -0.5 * sp.inner_product(
            grid64, sp.apply_laplacian(grid64, g), g
        )
        v = sp.harmonic_potential(grid64, [1.0])
        potential = grid64.quadrature_weight() * np.sum(v * g**2)
        assert abs(kinetic - potential) <= 1e-10


class TestEulerLagrangeResidual:
    def test_free_gaussian_eigenpair(self):
        # needs a resolved grid: the sampled Gaussian's spectral tail sets
        # the floor of its discrete stationarity defect
        grid = sp.make_grid(1, 16, 128)
        params = free_params(alpha=0.2)
        g = unit_gaussian(grid)
        phi = np.stack([np.sqrt(0.2) * g, np.sqrt(0.8) * g])
        residual, (mu1, mu2) = gs.euler_lagrange_residual(grid, phi, params, gs.NOJJ)
        assert residual <= 1e-10
        assert mu1 == pytest.approx(0.5, abs=1e-12)
        assert mu2 == pytest.approx(0.5, abs=1e-12)

    def test_detuning_shifts_potentials(self, grid64):
        params = gs.PhysParams(0, 0, 0, rabi=0.0, raman=0.4, gamma=(1.0,), alpha=0.2)
        g = unit_gaussian(grid64)
        phi = np.stack([np.sqrt(0.2) * g, np.sqrt(0.8) * g])
        _, (mu1, mu2) = gs.euler_lagrange_residual(grid64, phi, params, gs.NOJJ)
        assert mu1 == pytest.approx(0.7, abs=1e-12)
        assert mu2 == pytest.approx(0.3, abs=1e-12)

    def test_constraint_precondition(self, grid64):
        params = jj_params()
        g = unit_gaussian(grid64)
        phi = np.stack([g, g])  # total mass 2, violates the constraint
        with pytest.raises(ValueError, match="constraint"):
            gs.euler_lagrange_residual(grid64, phi, params, gs.JJ)

    def test_converged_state_consistency(self, jj1d_64):
        ground = jj1d_64[0]
        residual, mu = gs.euler_lagrange_residual(
            ground.grid, ground.phi, ground.params, ground.mode
        )
        assert residual == pytest.approx(ground.residual, abs=1e-10)
        assert mu == pytest.approx(ground.mu, abs=1e-10)


class TestMinimizer:
    def test_free_case_recovers_gaussian(self, grid64):
        params = free_params(alpha=0.2)
        state = gs.minimize_ground_state(grid64, params, gs.NOJJ, tol=1e-13)
        assert state.residual <= 1e-13
        assert state.mu1 == pytest.approx(0.5, abs=1e-10)
        assert state.mu2 == pytest.approx(0.5, abs=1e-10)
        assert state.energy == pytest.approx(0.5, abs=1e-10)
        g = unit_gaussian(grid64)
        np.testing.assert_allclose(state.phi[0], np.sqrt(0.2) * g, atol=1e-8)

    def test_jj_benchmark_converges(self, jj1d_64):
        ground = jj1d_64[0]
        assert ground.residual <= 1e-13
        assert gs.energy(ground.grid, ground.phi, ground.params) == pytest.approx(
            ground.energy, abs=1e-12
        )
        # junction sign convention: positive first component, negative second
        assert np.sum(ground.phi[0]) > 0
        assert np.sum(ground.phi[1]) < 0

    def test_mass_constraints_jj(self, jj1d_64):
        ground = jj1d_64[0]
        total = sp.norm(ground.grid, ground.phi) ** 2
        assert abs(total - 1.0) <= 1e-12

    def test_mass_constraints_nojj(self, grid64):
        params = nojj_params(alpha=0.2)
        state = gs.minimize_ground_state(grid64, params, gs.NOJJ)
        m1 = sp.norm(grid64, state.phi[0]) ** 2
        m2 = sp.norm(grid64, state.phi[1]) ** 2
        assert m1 == pytest.approx(0.2, abs=1e-12)
        assert m2 == pytest.approx(0.8, abs=1e-12)
        assert np.sum(state.phi[0]) > 0 and np.sum(state.phi[1]) > 0

    def test_energy_history_monotone(self, jj1d_64):
        ground = jj1d_64[0]
        diffs = np.diff(ground.energy_history)
        assert np.all(diffs <= 5e-12)

    def test_degenerate_alpha_rejected(self, grid64):
        with pytest.raises(ValueError, match="degenerate constraint"):
            gs.minimize_ground_state(
                grid64, nojj_params(alpha=0.0), gs.NOJJ
            )

    def test_iteration_budget_error(self, grid64):
        with pytest.raises(ConvergenceError) as err:
            gs.minimize_ground_state(grid64, jj_params(), gs.JJ, max_iter=3)
        assert err.value.residual is not None and err.value.residual > 0

    def test_real_output(self, jj1d_64):
        assert not np.iscomplexobj(jj1d_64[0].phi)


class TestGradient:
    def test_matches_finite_differences(self, grid64):
        # centered differences of the energy along random directions
        params = jj_params()
        rng = np.random.default_rng(11)
        phi = gs.gaussian_pair(grid64, params, signs=(1.0, -1.0))
        grad = gs.energy_gradient(grid64, phi, params)
        step = 1e-5
        for _ in range(5):
            xi = rng.standard_normal(phi.shape)
            xi /= sp.norm(grid64, xi)
            e_plus = gs.energy(grid64, phi + step * xi, params)
            e_minus = gs.energy(grid64, phi - step * xi, params)
            fd = (e_plus - e_minus) / (2 * step)
            analytic = sp.inner_product(grid64, grad, xi)
            assert abs(fd - analytic) / max(abs(fd), 1e-30) <= 1e-6

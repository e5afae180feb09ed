"""Grid construction, transforms, spectral derivatives and inner products."""

import numpy as np
import pytest

from becbdg import spectral as sp


class TestMakeGrid:
    def test_basic_1d(self):
        grid = sp.make_grid(1, 16, 32)
        assert grid.mesh_size == 1.0
        assert grid.total_points == 32
        # wavenumbers are pi*k/L for k = -N/2 .. N/2-1
        mu = np.sort(grid.wavenumbers)
        expected = np.pi / 16 * np.arange(-16, 16)
        np.testing.assert_allclose(mu, expected, rtol=0, atol=0)

    def test_exact_mesh_relation(self):
        grid = sp.make_grid(2, 7.5, 48)
        assert grid.mesh_size * grid.points_per_dim == 2 * grid.half_width

    def test_antisymmetric_multipliers(self):
        grid = sp.make_grid(1, 5, 16)
        mu = grid.wavenumbers
        # every mode except the unmatched -N/2 one has its negative present
        unmatched = mu[len(mu) // 2]
        assert unmatched == pytest.approx(-np.pi * 8 / 5)
        for m in mu:
            if m != unmatched and m != 0:
                assert -m in mu

    def test_3d_point_count(self):
        grid = sp.make_grid(3, 8, 16)
        assert grid.total_points == 4096
        assert grid.mesh_size == 1.0

    def test_odd_points_rejected(self):
        with pytest.raises(ValueError, match="even"):
            sp.make_grid(1, 16, 33)

    def test_tiny_grid_rejected(self):
        with pytest.raises(ValueError, match="invalid grid"):
            sp.make_grid(1, 16, 2)

    def test_nonpositive_domain_rejected(self):
        with pytest.raises(ValueError, match="invalid domain"):
            sp.make_grid(1, 0.0, 32)

    def test_bad_dimension_rejected(self):
        with pytest.raises(ValueError, match="dim"):
            sp.make_grid(4, 16, 32)


class TestTransforms:
    def test_plane_wave_coefficient(self):
        grid = sp.make_grid(1, 16, 32)
        k = 5
        wave = np.exp(1j * grid.wavenumbers[k] * (grid.points_1d + 16))
        coeffs = sp.forward_transform(grid, wave)
        assert coeffs[k] == pytest.approx(1.0, abs=1e-13)
        others = np.delete(coeffs, k)
        assert np.max(np.abs(others)) <= 1e-13

    def test_zero_preserved_exactly(self):
        grid = sp.make_grid(2, 16, 16)
        zero = np.zeros(grid.shape)
        assert np.all(sp.forward_transform(grid, zero) == 0)
        assert np.all(sp.backward_transform(grid, zero.astype(complex)) == 0)

    def test_roundtrip_random_real(self):
        grid = sp.make_grid(1, 16, 64)
        rng = np.random.default_rng(7)
        f = rng.standard_normal(64)
        back = sp.backward_transform(grid, sp.forward_transform(grid, f))
        err = np.linalg.norm(back - f) / np.linalg.norm(f)
        assert err <= 1e-13

    def test_roundtrip_random_3d(self):
        grid = sp.make_grid(3, 4, 8)
        rng = np.random.default_rng(8)
        f = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
        back = sp.backward_transform(grid, sp.forward_transform(grid, f))
        err = np.linalg.norm((back - f).ravel()) / np.linalg.norm(f.ravel())
        assert err <= 1e-13

    def test_parseval(self):
        # h^d sum |F|^2 == (2L)^d sum |F_hat|^2
        for dim, n in ((1, 128), (2, 32)):
            grid = sp.make_grid(dim, 16, n)
            rng = np.random.default_rng(dim)
            f = rng.standard_normal(grid.shape)
            lhs = grid.quadrature_weight() * np.sum(f**2)
            coeffs = sp.forward_transform(grid, f)
            rhs = (2 * grid.half_width) ** dim * np.sum(np.abs(coeffs) ** 2)
            assert abs(lhs - rhs) / lhs <= 1e-12

    def test_shape_mismatch(self):
        grid = sp.make_grid(1, 16, 32)
        with pytest.raises(ValueError, match="does not match grid"):
            sp.forward_transform(grid, np.zeros(31))


class TestLaplacian:
    def test_plane_wave_eigenfunction(self):
        grid = sp.make_grid(1, 16, 32)
        k = 9
        mu = grid.wavenumbers[k]
        wave = np.exp(1j * mu * (grid.points_1d + 16))
        lap = sp.apply_laplacian(grid, wave)
        np.testing.assert_allclose(lap, -mu**2 * wave, atol=1e-13 * mu**2)

    def test_constant_field(self):
        grid = sp.make_grid(2, 16, 16)
        lap = sp.apply_laplacian(grid, np.ones(grid.shape))
        assert np.max(np.abs(lap)) <= 1e-13

    def test_gaussian_analytic(self):
        # d^2/dx^2 exp(-x^2/2) = (x^2 - 1) exp(-x^2/2)
        grid = sp.make_grid(1, 16, 256)
        x = grid.points_1d
        f = np.exp(-0.5 * x**2)
        lap = sp.apply_laplacian(grid, f)
        exact = (x**2 - 1.0) * np.exp(-0.5 * x**2)
        assert np.max(np.abs(lap - exact)) <= 1e-12

    def test_linearity(self):
        grid = sp.make_grid(1, 16, 64)
        rng = np.random.default_rng(3)
        f, g = rng.standard_normal((2, 64))
        a, b = 0.7, -2.3
        lhs = sp.apply_laplacian(grid, a * f + b * g)
        rhs = a * sp.apply_laplacian(grid, f) + b * sp.apply_laplacian(grid, g)
        scale = np.max(np.abs(rhs))
        assert np.max(np.abs(lhs - rhs)) <= 1e-12 * scale

    def test_symmetric_negative(self):
        grid = sp.make_grid(1, 16, 64)
        rng = np.random.default_rng(4)
        f, g = rng.standard_normal((2, 64))
        lf = sp.apply_laplacian(grid, f)
        lg = sp.apply_laplacian(grid, g)
        sym = sp.inner_product(grid, lf, g) - sp.inner_product(grid, f, lg)
        scale = sp.norm(grid, lf) * sp.norm(grid, g)
        assert abs(sym) <= 1e-12 * max(1.0, scale)
        assert sp.inner_product(grid, lf, f) <= 1e-12

    def test_real_in_real_out(self):
        grid = sp.make_grid(2, 8, 16)
        rng = np.random.default_rng(5)
        out = sp.apply_laplacian(grid, rng.standard_normal(grid.shape))
        assert not np.iscomplexobj(out)


class TestDerivative:
    def test_sine_wave(self):
        grid = sp.make_grid(1, 16, 64)
        x = grid.points_1d
        mu = 3 * np.pi / 16
        f = np.sin(mu * x)
        df = sp.spectral_derivative(grid, f, 0)
        np.testing.assert_allclose(df, mu * np.cos(mu * x), atol=1e-12)

    def test_direction_axis_2d(self):
        grid = sp.make_grid(2, 16, 32)
        x = grid.coordinate(0)
        y = grid.coordinate(1)
        mu = 2 * np.pi / 16
        f = np.sin(mu * x) * np.cos(mu * y)
        dfx = sp.spectral_derivative(grid, f, 0)
        np.testing.assert_allclose(dfx, mu * np.cos(mu * x) * np.cos(mu * y),
                                   atol=1e-12)
        dfy = sp.spectral_derivative(grid, f, 1)
        np.testing.assert_allclose(dfy, -mu * np.sin(mu * x) * np.sin(mu * y),
                                   atol=1e-12)

    def test_real_output(self):
        grid = sp.make_grid(1, 16, 32)
        rng = np.random.default_rng(6)
        df = sp.spectral_derivative(grid, rng.standard_normal(32), 0)
        assert not np.iscomplexobj(df)


class TestInnerProduct:
    def test_positive_for_nonzero(self):
        grid = sp.make_grid(1, 16, 32)
        f = np.stack([np.exp(-0.5 * grid.points_1d**2), np.zeros(32)])
        val = sp.inner_product(grid, f, f)
        assert val > 0

    def test_distinct_plane_waves_orthogonal(self):
        grid = sp.make_grid(1, 16, 32)
        x = grid.points_1d
        w1 = np.stack([np.exp(1j * grid.wavenumbers[3] * (x + 16)), np.zeros(32)])
        w2 = np.stack([np.exp(1j * grid.wavenumbers[7] * (x + 16)), np.zeros(32)])
        assert abs(sp.inner_product(grid, w1, w2)) <= 1e-13 * 32

    def test_gaussian_against_analytic(self):
        # integral of exp(-x^2) over the line is sqrt(pi); the lattice sum is
        # exponentially accurate at this resolution
        grid = sp.make_grid(1, 16, 256)
        g = np.exp(-0.5 * grid.points_1d**2)
        assert abs(sp.inner_product(grid, g, g) - np.sqrt(np.pi)) <= 1e-12
        unit = g / sp.norm(grid, g)
        pair = np.stack([unit, unit])
        assert sp.inner_product(grid, pair, pair) == pytest.approx(2.0, abs=1e-12)

    def test_conjugate_symmetry(self):
        grid = sp.make_grid(1, 16, 32)
        rng = np.random.default_rng(2)
        a = rng.standard_normal((2, 32)) + 1j * rng.standard_normal((2, 32))
        b = rng.standard_normal((2, 32)) + 1j * rng.standard_normal((2, 32))
        assert sp.inner_product(grid, a, b) == pytest.approx(
            np.conj(sp.inner_product(grid, b, a)), abs=1e-14
        )

    def test_mismatched_shapes(self):
        grid = sp.make_grid(1, 16, 32)
        with pytest.raises(ValueError, match="do not match"):
            sp.inner_product(grid, np.zeros((2, 32)), np.zeros(32))


class TestHarmonicPotential:
    def test_1d_value(self):
        grid = sp.make_grid(1, 16, 32)
        v = sp.harmonic_potential(grid, [1.0])
        idx = np.argmin(np.abs(grid.points_1d - 2.0))
        assert v[idx] == pytest.approx(2.0)

    def test_2d_anisotropic(self):
        grid = sp.make_grid(2, 16, 32)
        v = sp.harmonic_potential(grid, [1.0, 2.0])
        ix = np.argmin(np.abs(grid.points_1d - 1.0))
        # x is the last axis, y the first
        assert v[ix, ix] == pytest.approx(2.5)

    def test_3d_origin(self):
        grid = sp.make_grid(3, 8, 16)
        v = sp.harmonic_potential(grid, [1.0, 1.0, 1.0])
        i0 = np.argmin(np.abs(grid.points_1d))
        assert v[i0, i0, i0] == 0.0

    def test_wrong_length(self):
        grid = sp.make_grid(2, 16, 32)
        with pytest.raises(ValueError, match="one entry per dimension"):
            sp.harmonic_potential(grid, [1.0])

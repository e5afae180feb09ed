"""Fourier pseudo-spectral machinery on a truncated periodic box.

The computational domain is the periodic box [-L, L]^d sampled on a uniform
lattice with N points per direction, x_n = -L + n*h, h = 2L/N.  Plane-wave
wavenumbers are mu_k = pi*k/L for k = -N/2 .. N/2-1, stored in FFT wraparound
order.  The forward transform carries a 1/N normalization per dimension, so
the coefficient of the plane wave exp(i*mu_k*(x+L)) sampled on the lattice is
exactly 1 at index k.

Field conventions
-----------------
Scalar fields are plain ndarrays of shape ``grid.shape``; two-component
fields stack the components along a leading axis, shape ``(2,) + grid.shape``.
All spectral operations act on the trailing ``dim`` axes, so any number of
leading axes (components, block columns) pass through untouched.  Flattened
storage is C order with the x coordinate varying fastest: axis -1 is x,
axis -2 is y, axis -3 is z.  Real fields stay in real dtype arrays and are
promoted to complex only inside transforms.

All functions here are pure with respect to their arguments; nothing mutates
its inputs, so values can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as _fft

__all__ = [
    "SpectralGrid",
    "make_grid",
    "forward_transform",
    "backward_transform",
    "apply_laplacian",
    "spectral_derivative",
    "inner_product",
    "norm",
    "harmonic_potential",
    "kinetic_shift_inverse",
    "apply_fourier_multiplier",
]

# Residual imaginary parts above this (relative) level on a nominally real
# result indicate a bug rather than roundoff.
_IMAG_TOL = 1e-13


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform periodic lattice on [-L, L]^d with cached Fourier symbols.

    Parameters
    ----------
    dim : int
        Spatial dimension, 1, 2 or 3.
    half_width : float
        Half box size L; the domain is [-L, L] in every direction.
    points_per_dim : int
        Even number of lattice points per direction, at least 4.

    Derived attributes (computed once, read-only): ``mesh_size`` h = 2L/N,
    ``shape``, ``total_points`` N^d, ``wavenumbers`` (1D array mu_k = pi*k/L
    in FFT order, shared by all directions), ``laplacian_symbol`` (dense
    d-dimensional array of sum_sigma mu_k^2, including the unmatched
    k = -N/2 mode) and ``points_1d`` (lattice coordinates along one axis).
    """

    dim: int
    half_width: float
    points_per_dim: int

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        if self.half_width <= 0:
            raise ValueError(
                f"invalid domain: half_width must be positive, got {self.half_width}"
            )
        n = self.points_per_dim
        if n != int(n) or n % 2 != 0 or n < 4:
            raise ValueError(
                f"invalid grid: points_per_dim must be an even integer >= 4, got {n}"
            )
        L = float(self.half_width)
        h = 2.0 * L / n
        object.__setattr__(self, "mesh_size", h)
        object.__setattr__(self, "shape", (n,) * self.dim)
        object.__setattr__(self, "total_points", n**self.dim)

        freqs = np.fft.fftfreq(n) * n  # integers 0..N/2-1, -N/2..-1
        mu = (np.pi / L) * freqs
        mu.setflags(write=False)
        object.__setattr__(self, "wavenumbers", mu)

        sym = np.zeros(self.shape)
        for axis in range(self.dim):
            sym += _along_axis(mu**2, axis, self.dim)
        sym.setflags(write=False)
        object.__setattr__(self, "laplacian_symbol", sym)

        # First-derivative symbol zeroes the unmatched -N/2 mode so that
        # derivatives of real fields stay real.
        dmu = mu.copy()
        dmu[n // 2] = 0.0
        dmu.setflags(write=False)
        object.__setattr__(self, "_derivative_wavenumbers", dmu)

        x1 = -L + h * np.arange(n)
        x1.setflags(write=False)
        object.__setattr__(self, "points_1d", x1)

    @property
    def spatial_axes(self):
        """The trailing ndarray axes spectral operations act on."""
        return tuple(range(-self.dim, 0))

    def axis_of(self, direction: int) -> int:
        """ndarray axis for spatial direction (0 = x, 1 = y, 2 = z)."""
        if not 0 <= direction < self.dim:
            raise ValueError(f"direction {direction} out of range for dim {self.dim}")
        return -1 - direction

    def coordinate(self, direction: int) -> np.ndarray:
        """Dense array of the given coordinate at every lattice point."""
        along = _along_axis(self.points_1d, direction, self.dim)
        return np.broadcast_to(along, self.shape)

    def quadrature_weight(self) -> float:
        """Weight h^d of the trapezoidal (here: exact periodic) quadrature."""
        return self.mesh_size**self.dim


def _along_axis(values_1d: np.ndarray, direction: int, dim: int) -> np.ndarray:
    """Reshape a per-axis 1D array so it broadcasts along one direction.

    Direction 0 (x) is the last ndarray axis.
    """
    shape = [1] * dim
    shape[dim - 1 - direction] = len(values_1d)
    return values_1d.reshape(shape)


def make_grid(dim: int, half_width: float, points_per_dim: int) -> SpectralGrid:
    """Construct a SpectralGrid, validating dimension, domain and parity."""
    return SpectralGrid(dim=dim, half_width=float(half_width), points_per_dim=int(points_per_dim))


def _check_field(grid: SpectralGrid, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values)
    if values.shape[-grid.dim :] != grid.shape:
        raise ValueError(
            f"field shape {values.shape} does not match grid shape {grid.shape}"
        )
    return values


def forward_transform(grid: SpectralGrid, values: np.ndarray) -> np.ndarray:
    """Discrete Fourier coefficients with 1/N normalization per dimension.

    A sampled plane wave exp(i*mu_k*(x+L)) maps to a coefficient array that
    is 1 at index k and 0 elsewhere.  Acts on the trailing ``dim`` axes.
    """
    values = _check_field(grid, values)
    return _fft.fftn(values, axes=grid.spatial_axes) / grid.total_points


def backward_transform(grid: SpectralGrid, coeffs: np.ndarray) -> np.ndarray:
    """Inverse of :func:`forward_transform` (no normalization factor)."""
    coeffs = _check_field(grid, coeffs)
    return _fft.ifftn(coeffs, axes=grid.spatial_axes) * grid.total_points


def _real_guard(out: np.ndarray) -> np.ndarray:
    """Drop the imaginary residue of a nominally real result, with a check."""
    scale = max(1.0, float(np.max(np.abs(out.real), initial=0.0)))
    imag_max = float(np.max(np.abs(out.imag), initial=0.0))
    assert imag_max <= _IMAG_TOL * scale, (
        f"imaginary residue {imag_max:.3e} exceeds {_IMAG_TOL:.0e} * {scale:.3e}"
    )
    return out.real.copy()


def apply_fourier_multiplier(
    grid: SpectralGrid, symbol: np.ndarray, values: np.ndarray
) -> np.ndarray:
    """Apply a Fourier-diagonal operator: ifft(symbol * fft(values)).

    Real input with a real symbol yields real output; that case runs
    through the half-spectrum real transforms, which enforce conjugate
    symmetry structurally (no imaginary residue can appear).  Complex input
    uses the full transforms.
    """
    values = _check_field(grid, values)
    axes = grid.spatial_axes
    if np.isrealobj(values) and np.isrealobj(symbol):
        half = np.asarray(symbol)[..., : grid.points_per_dim // 2 + 1]
        spec = _fft.rfftn(values, axes=axes)
        return _fft.irfftn(half * spec, s=grid.shape, axes=axes)
    return _fft.ifftn(symbol * _fft.fftn(values, axes=axes), axes=axes)


def apply_laplacian(grid: SpectralGrid, values: np.ndarray) -> np.ndarray:
    """Spectral Laplacian: multiply by -sum_sigma mu_k^2 in Fourier space.

    The unmatched k = -N/2 multiplier is retained, which keeps the operator
    symmetric negative semi-definite on the full coefficient space.
    """
    return apply_fourier_multiplier(grid, -grid.laplacian_symbol, values)


def spectral_derivative(grid: SpectralGrid, values: np.ndarray, direction: int) -> np.ndarray:
    """First derivative along a direction; the -N/2 mode is zeroed."""
    axis_mu = _along_axis(grid._derivative_wavenumbers, direction, grid.dim)
    values = _check_field(grid, values)
    axes = grid.spatial_axes
    out = _fft.ifftn(1j * axis_mu * _fft.fftn(values, axes=axes), axes=axes)
    if np.isrealobj(values):
        return _real_guard(out)
    return out


def inner_product(grid: SpectralGrid, a: np.ndarray, b: np.ndarray):
    """Discrete inner product h^d * sum_n a(x_n) * conj(b(x_n)).

    Sums over every axis of its arguments, so it applies equally to scalar
    fields and to stacked multi-component fields (both components summed).
    Conjugate-symmetric: inner_product(a, b) == conj(inner_product(b, a)).
    Returns a float for real inputs, complex otherwise.
    """
    a = _check_field(grid, a)
    b = _check_field(grid, b)
    if a.shape != b.shape:
        raise ValueError(f"field shapes {a.shape} and {b.shape} do not match")
    # vdot conjugates its first argument: sum conj(b) * a.
    return grid.quadrature_weight() * np.vdot(b, a)


def norm(grid: SpectralGrid, a: np.ndarray) -> float:
    """Weighted l2 norm sqrt(h^d * sum |a|^2)."""
    a = _check_field(grid, a)
    return float(np.sqrt(grid.quadrature_weight()) * np.linalg.norm(a.ravel()))


def harmonic_potential(grid: SpectralGrid, gamma) -> np.ndarray:
    """Trap potential V(x) = 1/2 * sum_sigma gamma_sigma^2 sigma^2."""
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    if gamma.shape != (grid.dim,):
        raise ValueError(
            f"gamma must have one entry per dimension ({grid.dim}), got shape {gamma.shape}"
        )
    if np.any(gamma <= 0):
        raise ValueError("trap frequencies must be positive")
    out = np.zeros(grid.shape)
    for direction in range(grid.dim):
        out += 0.5 * (gamma[direction] * grid.coordinate(direction)) ** 2
    return out


def kinetic_shift_inverse(grid: SpectralGrid, shift: float) -> np.ndarray:
    """Fourier symbol of (shift + kinetic)^(-1), kinetic = -1/2 Laplacian.

    This is the diagonal preconditioner used by the ground-state minimizer
    and the inner conjugate-gradient solves.
    """
    if shift <= 0:
        raise ValueError("preconditioner shift must be positive")
    return 1.0 / (shift + 0.5 * grid.laplacian_symbol)

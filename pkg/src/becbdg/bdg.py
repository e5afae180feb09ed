"""Matrix-free Bogoliubov-de Gennes operators around a real ground state.

For a real stationary state the linearized excitation problem closes over
two Hermitian operators, here called ``hplus`` and ``hminus``.  Both act on
two-component real fields and differ only in multiplicative coefficients:

    hminus = gpe_linearization - mu   (annihilates the ground state)
    hplus  = hminus + 2 * pairing     (conjectured positive definite)

Each application costs one spectral Laplacian per component (two FFT round
trips) plus pointwise products, so the whole suite runs at O(Nt log Nt) per
operator call without ever materializing a matrix.  Dense assembly from the
explicit symbol formulas is provided separately for small-grid verification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConvergenceError, IndefiniteOperatorError, NullspaceVerificationError
from .groundstate import JJ, NOJJ, GroundState
from .spectral import (
    SpectralGrid,
    apply_fourier_multiplier,
    apply_laplacian,
    harmonic_potential,
    inner_product,
    kinetic_shift_inverse,
    norm,
    spectral_derivative,
)

__all__ = [
    "BdgContext",
    "NullspaceBasis",
    "build_context",
    "apply_hplus",
    "apply_hminus",
    "apply_hplus_inverse",
    "build_nullspace",
    "analytic_eigenpairs",
    "dense_laplacian",
    "assemble_dense_explicit",
]

_GROUND_RESIDUAL_BOUND = 1e-9
_NULLSPACE_RESIDUAL_BOUND = 1e-9


@dataclass(frozen=True)
class BdgContext:
    """Cached multiplicative fields binding the BdG operators to a ground state.

    ``l1_diag`` / ``l2_diag`` are the multiplicative parts of the shifted
    single-particle operators (potential, detuning, mean-field shifts, minus
    the chemical potential), ``offdiag_a`` the symmetric coupling of the
    non-pairing block and ``b11``/``b12``/``b22`` the pairing fields.
    ``b_sign`` scales the pairing block and exists solely as a
    fault-injection hook for the validation command; it is 1.0 in any
    physical run.  Instances are immutable and the appliers are reentrant.
    """

    ground: GroundState
    potential: np.ndarray
    l1_diag: np.ndarray
    l2_diag: np.ndarray
    offdiag_a: np.ndarray
    b11: np.ndarray
    b12: np.ndarray
    b22: np.ndarray
    b_sign: float = 1.0

    @property
    def grid(self) -> SpectralGrid:
        return self.ground.grid

    def apply_hplus(self, x: np.ndarray) -> np.ndarray:
        return _apply(self, x, +1.0)

    def apply_hminus(self, x: np.ndarray) -> np.ndarray:
        return _apply(self, x, -1.0)


def build_context(ground: GroundState, *, b_sign: float = 1.0) -> BdgContext:
    """Precompute every multiplicative field the matrix-free appliers need.

    Requires a tight stationary state: an Euler-Lagrange residual above
    1e-9 would pollute the spectrum near zero, so it is rejected here.
    """
    if ground.residual > _GROUND_RESIDUAL_BOUND:
        raise ValueError(
            f"ground-state residual {ground.residual:.3e} exceeds "
            f"{_GROUND_RESIDUAL_BOUND:.0e}; refusing to build BdG operators"
        )
    if np.iscomplexobj(ground.phi):
        raise ValueError("BdG operators require a real-valued ground state")
    grid = ground.grid
    p = ground.params
    phi1, phi2 = ground.phi[0], ground.phi[1]
    v = harmonic_potential(grid, p.gamma)
    if ground.mode == JJ:
        mu1 = mu2 = ground.mu
    else:
        mu1, mu2 = ground.mu1, ground.mu2
    rho1 = phi1**2
    rho2 = phi2**2
    l1 = v + 0.5 * p.raman + 2.0 * p.beta11 * rho1 + p.beta12 * rho2 - mu1
    l2 = v - 0.5 * p.raman + p.beta12 * rho1 + 2.0 * p.beta22 * rho2 - mu2
    cross = p.beta12 * phi1 * phi2
    for arr in (v, l1, l2, cross):
        arr.setflags(write=False)
    b11 = p.beta11 * rho1
    b22 = p.beta22 * rho2
    b11.setflags(write=False)
    b22.setflags(write=False)
    ctx = BdgContext(
        ground=ground,
        potential=v,
        l1_diag=l1,
        l2_diag=l2,
        offdiag_a=cross + 0.5 * p.rabi,
        b11=b11,
        b12=cross,
        b22=b22,
        b_sign=float(b_sign),
    )
    # Combined multiplicative fields per operator, precomputed once: the
    # appliers run in tight loops.
    s = ctx.b_sign
    object.__setattr__(ctx, "_plus_fields",
                       (l1 + s * b11, l2 + s * b22, ctx.offdiag_a + s * cross))
    object.__setattr__(ctx, "_minus_fields",
                       (l1 - s * b11, l2 - s * b22, ctx.offdiag_a - s * cross))
    return ctx


def _apply(ctx: BdgContext, x: np.ndarray, pairing_sign: float) -> np.ndarray:
    """Evaluate (A + s*B) x matrix-free; x has shape (..., 2) + grid.shape.

    One fused spectral Laplacian over both components plus pointwise
    products with the precombined fields.
    """
    grid = ctx.grid
    x = np.asarray(x)
    if x.shape[-grid.dim - 1 :] != (2,) + grid.shape:
        raise ValueError(
            f"operand must end with shape {(2,) + grid.shape}, got {x.shape}"
        )
    d1, d2, off = ctx._plus_fields if pairing_sign > 0 else ctx._minus_fields
    kin = -0.5 * apply_laplacian(grid, x)
    sl1 = (Ellipsis, 0) + (slice(None),) * grid.dim
    sl2 = (Ellipsis, 1) + (slice(None),) * grid.dim
    x1, x2 = x[sl1], x[sl2]
    out = np.empty_like(kin)
    out[sl1] = kin[sl1] + d1 * x1 + off * x2
    out[sl2] = kin[sl2] + d2 * x2 + off * x1
    return out


def apply_hplus(ctx: BdgContext, x: np.ndarray) -> np.ndarray:
    """Apply the pairing-added Hermitian operator (positive definite)."""
    return ctx.apply_hplus(x)


def apply_hminus(ctx: BdgContext, x: np.ndarray) -> np.ndarray:
    """Apply the pairing-subtracted Hermitian operator (annihilates phi_g)."""
    return ctx.apply_hminus(x)


def apply_hplus_inverse(
    ctx: BdgContext,
    rhs: np.ndarray,
    tol: float = 1e-11,
    max_iter: int | None = None,
) -> np.ndarray:
    """Solve hplus y = rhs by preconditioned conjugate gradients.

    The preconditioner is the Fourier-diagonal (1 + kinetic)^(-1).  Stops at
    ||hplus y - rhs|| <= tol * ||rhs||.  A non-positive curvature direction
    raises IndefiniteOperatorError (it would falsify the positivity
    conjecture for these parameters); exhausting the iteration cap raises
    ConvergenceError.
    """
    y, _ = _pcg_hplus(ctx, rhs[np.newaxis], tol, max_iter)
    return y[0]


def _sandwich_preconditioner(ctx: BdgContext, which: str, shift: float = 1.0):
    """Symmetric kinetic/potential split preconditioner for the CG solves.

    Conjugates the Fourier-diagonal kinetic inverse with the pointwise
    inverse square root of the (clipped) multiplicative fields:

        P = M^(1/2) (1 + kinetic)^(-1) M^(1/2),   M = 1/(1 + shift + diag+)

    Both tails of the operator (high wavenumbers and the steep trap walls)
    are captured, which matters because the potential at the box corners
    dwarfs the physical energy scales.
    """
    grid = ctx.grid
    d1, d2, _ = ctx._plus_fields if which == "plus" else ctx._minus_fields
    m = np.stack([np.clip(d1, 0.0, None), np.clip(d2, 0.0, None)]) + 1.0 + shift
    sqm = 1.0 / np.sqrt(m)
    sym = kinetic_shift_inverse(grid, 1.0)

    def apply_precond(r):
        return sqm * apply_fourier_multiplier(grid, sym, sqm * r)

    return apply_precond


def _pcg(grid, apply_fn, rhs_block, tol, max_iter, projector=None, strict=True,
         operator_name="operator", precond=None):
    """Blocked PCG returning (solutions, total column iterations).

    Runs one recurrence per column in lockstep so the FFTs batch; columns
    freeze once their relative residual passes ``tol``.  When the operator
    is singular on a known subspace, ``projector`` keeps the iteration
    inside the complement where the system is consistent and positive
    definite.  With ``strict=False`` the routine returns its best iterate at
    the cap instead of raising (used for inexact preconditioning solves,
    where accuracy is optional by design).
    """
    rhs = np.asarray(rhs_block, dtype=float)
    w = grid.quadrature_weight()
    if precond is None:
        sym = kinetic_shift_inverse(grid, 1.0)

        def precond(r):
            return apply_fourier_multiplier(grid, sym, r)

    def dots(a, b):
        k = a.shape[0]
        return w * np.einsum("ki,ki->k", a.reshape(k, -1), b.reshape(k, -1))

    if projector is not None:
        rhs = projector(rhs)
    rhs_norm = np.sqrt(dots(rhs, rhs))
    x = np.zeros_like(rhs)
    live = rhs_norm > 0
    if not np.any(live):
        return x, 0
    r = rhs.copy()
    z = precond(r)
    if projector is not None:
        z = projector(z)
    p = z.copy()
    rz = dots(r, z)
    res = rhs_norm.copy()
    total = 0
    for _ in range(max_iter):
        hp = apply_fn(p)
        php = dots(p, hp)
        bad = live & (php <= 0)
        if np.any(bad):
            raise IndefiniteOperatorError(
                "conjugate gradients met non-positive curvature: "
                f"p'Hp = {php[bad][0]:.3e}; {operator_name} is not positive definite here"
            )
        alpha = np.where(live, rz / np.where(php == 0, 1.0, php), 0.0)
        x = x + _col(alpha, p)
        r = r - _col(alpha, hp)
        total += int(np.count_nonzero(live))
        res = np.sqrt(dots(r, r))
        live = res > tol * rhs_norm
        if not np.any(live):
            return x, total
        z = precond(r)
        if projector is not None:
            z = projector(z)
        rz_new = dots(r, z)
        beta = np.where(live, rz_new / np.where(rz == 0, 1.0, rz), 0.0)
        p = z + _col(beta, p)
        rz = rz_new
    if not strict:
        return x, total
    raise ConvergenceError(
        f"{operator_name} inverse: {int(np.count_nonzero(live))} column(s) above "
        f"tolerance after {max_iter} iterations",
        residual=float(np.max(res / np.maximum(rhs_norm, 1e-300))),
    )


def _pcg_hplus(ctx, rhs_block, tol, max_iter=None, projector=None):
    """Tight blocked PCG solve of hplus y = rhs (the solver metric)."""
    if max_iter is None:
        max_iter = 10 * ctx.grid.total_points
    return _pcg(ctx.grid, ctx.apply_hplus, rhs_block, tol, max_iter,
                projector=projector, operator_name="hplus",
                precond=_sandwich_preconditioner(ctx, "plus", shift=0.0))


def _col(coeff, block):
    """Scale each leading-axis column of a block by a coefficient."""
    return coeff.reshape((-1,) + (1,) * (block.ndim - 1)) * block


@dataclass(frozen=True)
class NullspaceBasis:
    """Generalized-nullspace data used for deflation.

    ``kernel_g`` spans the nullspace of hminus (the ground state, plus the
    mass-exchange direction in "nojj" mode); ``kernel_f`` holds the
    hplus-inverse images of those vectors.  ``c1``/``c2`` are the
    mass-exchange coefficients, None in "jj" mode.  All residual bounds are
    verified at construction.

    With every interaction off, hplus degenerates to hminus and is merely
    positive semi-definite: the kernel vectors have no hplus-inverse images
    and the generalized nullspace does not extend beyond the plain one.  In
    that regime ``hplus_singular`` is True, ``kernel_f`` is empty, and
    deflation falls back to plain orthogonal projection.
    """

    kernel_g: np.ndarray
    kernel_f: np.ndarray
    c1: float | None = None
    c2: float | None = None
    hplus_singular: bool = False

    @property
    def size(self) -> int:
        return self.kernel_g.shape[0]


def nullspace_coefficients(alpha: float) -> tuple:
    """Coefficients (c1, c2) of the second nullspace vector without junction.

    c1 = -sqrt((1-alpha)/alpha), c2 = sqrt(alpha/(1-alpha)); the resulting
    vector (c1 phi_1, c2 phi_2) is unit-norm and orthogonal to the ground
    state.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"degenerate constraint: need 0 < alpha < 1, got {alpha}")
    return -np.sqrt((1.0 - alpha) / alpha), np.sqrt(alpha / (1.0 - alpha))


def build_nullspace(ctx: BdgContext, *, inverse_tol: float = 1e-11) -> NullspaceBasis:
    """Construct and verify the deflation basis for the excitation solver."""
    grid = ctx.grid
    ground = ctx.ground
    if ground.mode == JJ:
        kernel_g = ground.phi[np.newaxis].astype(float)
        c1 = c2 = None
    else:
        c1, c2 = nullspace_coefficients(ground.params.alpha)
        second = np.stack([c1 * ground.phi[0], c2 * ground.phi[1]])
        kernel_g = np.stack([ground.phi.astype(float), second])
        ortho = abs(inner_product(grid, kernel_g[0], kernel_g[1]))
        unit = abs(norm(grid, kernel_g[1]) - 1.0)
        if ortho > 1e-12 or unit > 1e-12:
            raise NullspaceVerificationError(
                f"mass-exchange vector defective: overlap {ortho:.3e}, "
                f"norm defect {unit:.3e}",
                defect=max(ortho, unit),
            )

    for j in range(kernel_g.shape[0]):
        gnorm = norm(grid, kernel_g[j])
        hm = norm(grid, ctx.apply_hminus(kernel_g[j]))
        if hm > _NULLSPACE_RESIDUAL_BOUND * gnorm:
            raise NullspaceVerificationError(
                f"hminus does not annihilate nullspace vector {j}: "
                f"residual {hm:.3e}",
                defect=hm,
            )

    # Interaction-free degeneracy: hplus itself annihilates the kernel, so
    # no inverse images exist and the generalized nullspace stops at the
    # plain one.
    hp_norms = [norm(grid, ctx.apply_hplus(kernel_g[j])) for j in range(kernel_g.shape[0])]
    singular = [h <= _NULLSPACE_RESIDUAL_BOUND * norm(grid, kernel_g[j])
                for j, h in enumerate(hp_norms)]
    if any(singular):
        if not all(singular):
            raise NullspaceVerificationError(
                "hplus is singular on part of the nullspace only; "
                f"norms {hp_norms}"
            )
        kernel_g.setflags(write=False)
        kernel_f = np.zeros((0,) + kernel_g.shape[1:])
        return NullspaceBasis(kernel_g=kernel_g, kernel_f=kernel_f,
                              c1=c1, c2=c2, hplus_singular=True)

    kernel_f, _ = _pcg_hplus(ctx, kernel_g, inverse_tol)
    for j in range(kernel_g.shape[0]):
        back = norm(grid, ctx.apply_hplus(kernel_f[j]) - kernel_g[j])
        if back > _NULLSPACE_RESIDUAL_BOUND:
            raise NullspaceVerificationError(
                f"hplus inverse image {j} defective: residual {back:.3e}",
                defect=back,
            )
    kernel_g.setflags(write=False)
    kernel_f.setflags(write=False)
    return NullspaceBasis(kernel_g=kernel_g, kernel_f=kernel_f, c1=c1, c2=c2)


def analytic_eigenpairs(ground: GroundState, *, check_normalization: bool = True):
    """Exact harmonic-trap excitation pairs built from the ground state.

    For each direction sigma the trap frequency itself is an excitation
    energy, with amplitudes

        u = (gamma^(-1/2) d_sigma phi - gamma^(1/2) sigma phi) / sqrt(2)
        v = (gamma^(-1/2) d_sigma phi + gamma^(1/2) sigma phi) / sqrt(2)

    (sigma denotes the coordinate).  Returns a list of (omega, u, v) tuples.
    On a resolved grid each pair satisfies ||u||^2 - ||v||^2 = 1 to 1e-9,
    checked unless ``check_normalization`` is disabled; convergence sweeps
    disable it because on coarse grids the defect IS the discretization
    error being measured.
    """
    grid = ground.grid
    phi = ground.phi
    pairs = []
    for direction in range(grid.dim):
        gam = ground.params.gamma[direction]
        dphi = np.stack([spectral_derivative(grid, phi[j], direction) for j in range(2)])
        xphi = grid.coordinate(direction) * phi
        u = (dphi / np.sqrt(gam) - np.sqrt(gam) * xphi) / np.sqrt(2.0)
        v = (dphi / np.sqrt(gam) + np.sqrt(gam) * xphi) / np.sqrt(2.0)
        normalization = norm(grid, u) ** 2 - norm(grid, v) ** 2
        if check_normalization and abs(normalization - 1.0) > 1e-9:
            raise NullspaceVerificationError(
                f"analytic pair for direction {direction} violates normalization: "
                f"{normalization - 1.0:.3e}",
                defect=abs(normalization - 1.0),
            )
        pairs.append((gam, u, v))
    return pairs


def dense_laplacian(grid: SpectralGrid) -> np.ndarray:
    """Dense spectral Laplacian assembled from the explicit DFT matrices.

    Independent of the FFT code path: builds the forward/backward transform
    matrices elementwise and conjugates the diagonal multiplier.  Intended
    for small grids only (memory grows like Nt^2).
    """
    n = grid.points_per_dim
    idx = np.arange(n)
    # Forward DFT with 1/N normalization and its unnormalized inverse.
    fwd = np.exp(-2j * np.pi * np.outer(idx, idx) / n) / n
    bwd = np.exp(+2j * np.pi * np.outer(idx, idx) / n)
    lap1 = (bwd * (-grid.wavenumbers**2)) @ fwd
    lap1 = lap1.real
    out = np.zeros((grid.total_points, grid.total_points))
    eye = np.eye(n)
    for direction in range(grid.dim):
        factors = [eye] * grid.dim
        factors[grid.dim - 1 - direction] = lap1  # x fastest: x is last factor
        term = factors[0]
        for f in factors[1:]:
            term = np.kron(term, f)
        out += term
    return out


def assemble_dense_explicit(ctx: BdgContext, which: str) -> np.ndarray:
    """Dense hplus/hminus from symbol formulas (kinetic + diagonal fields).

    ``which`` is "plus" or "minus".  Layout matches the flattened field
    order: component-major, x fastest within each component block.
    """
    if which not in ("plus", "minus"):
        raise ValueError("which must be 'plus' or 'minus'")
    s = (1.0 if which == "plus" else -1.0) * ctx.b_sign
    grid = ctx.grid
    nt = grid.total_points
    kin = -0.5 * dense_laplacian(grid)
    d1 = np.diag((ctx.l1_diag + s * ctx.b11).ravel())
    d2 = np.diag((ctx.l2_diag + s * ctx.b22).ravel())
    off = np.diag((ctx.offdiag_a + s * ctx.b12).ravel())
    out = np.zeros((2 * nt, 2 * nt))
    out[:nt, :nt] = kin + d1
    out[nt:, nt:] = kin + d2
    out[:nt, nt:] = off
    out[nt:, :nt] = off
    return out

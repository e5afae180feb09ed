"""Deflated block eigensolver for the two-operator linear-response problem.

The excitation energies omega and amplitude pairs (f, g) satisfy

    hminus g = omega f,      hplus f = omega g,

which decouples into the product problems hminus(hplus f) = omega^2 f and
hplus(hminus g) = omega^2 g.  Multiplying the f-side problem by hplus gives
the symmetric-definite pencil

    hplus hminus hplus f = omega^2 * hplus f,

whose operators are all applied forward, matrix-free and exactly: no inner
solve enters the iteration, so the subspace bookkeeping carries no
accumulated inverse error.  A locally optimal block preconditioned
iteration runs on it: trial blocks are projected metric-orthogonally
against the generalized nullspace before every Rayleigh-Ritz step (the
metric images of the nullspace are known analytically), search directions
come from an inexact inverse of the shifted operators, and the projected
(at most 3 * block_size) symmetric eigenproblem is solved densely each
iteration.  Convergence is declared on the residual of the recovered
(f, g) pair, and every returned mode is re-verified with fresh operator
applications after the bi-orthogonal cleanup sweep.

A dense brute-force route over the explicitly assembled operators provides
an independent oracle for small grids.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .bdg import BdgContext, NullspaceBasis, _pcg, _sandwich_preconditioner
from .exceptions import PartialResultError, StructureViolationError
from .spectral import SpectralGrid

__all__ = [
    "SolverOptions",
    "ModePair",
    "SpectrumResult",
    "biorthonormalize",
    "solve_spectrum",
    "dense_oracle_solve",
    "dense_full_spectrum",
    "zero_multiplicity",
    "assemble_dense_from_applier",
    "check_biorthogonality",
]

# Computed eigenvalues below this are deflated-nullspace leftovers, not
# physical excitations.
_ZERO_FLOOR = 1e-5
_CLUSTER_RTOL = 1e-6


@dataclass(frozen=True)
class SolverOptions:
    """Knobs of the iterative spectrum solver.

    ``n_ev`` smallest positive excitation energies are computed to relative
    residual ``tol``; the working block holds ``block_size`` vectors
    (default n_ev + 8).  ``inner_tol`` controls the metric solves and
    ``seed`` fixes the random starting block, making runs reproducible.
    """

    n_ev: int = 6
    tol: float = 1e-9
    max_outer: int = 200
    block_size: int | None = None
    inner_tol: float = 1e-11
    seed: int = 0

    def __post_init__(self):
        if self.n_ev < 1:
            raise ValueError(f"n_ev must be >= 1, got {self.n_ev}")
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.block_size is not None and self.block_size < self.n_ev:
            raise ValueError("block_size must be at least n_ev")

    @property
    def block(self) -> int:
        return self.block_size if self.block_size is not None else self.n_ev + 8


@dataclass(frozen=True)
class ModePair:
    """One excitation: energy, (f, g) pair and (u, v) amplitudes.

    Normalized so that <f, g> = 1/4, equivalently h^d(||u||^2 - ||v||^2) = 1
    with u = f + g, v = f - g.  ``residual`` is the freshly recomputed
    ||hminus g - omega f|| + ||hplus f - omega g||; ``biorth_defect`` the
    largest overlap <f, g_other> against the other returned modes.
    """

    omega: float
    f: np.ndarray
    g: np.ndarray
    u: np.ndarray
    v: np.ndarray
    residual: float
    biorth_defect: float


@dataclass(frozen=True)
class SpectrumResult:
    """Ascending positive excitation modes plus solver bookkeeping."""

    modes: list
    nullspace: NullspaceBasis
    iterations: int
    matvec_count: int
    wall_time: float

    @property
    def omegas(self) -> np.ndarray:
        return np.array([m.omega for m in self.modes])

    @property
    def residuals(self) -> np.ndarray:
        return np.array([m.residual for m in self.modes])


def _gram(grid: SpectralGrid, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Weighted Gram matrix between two blocks of fields, shape (ka, kb)."""
    ka, kb = a.shape[0], b.shape[0]
    return grid.quadrature_weight() * (a.reshape(ka, -1) @ b.reshape(kb, -1).T)


def _combine(block: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Linear combinations of block columns: out_b = sum_a coeffs[a, b] * block_a."""
    k = block.shape[0]
    flat = coeffs.T @ block.reshape(k, -1)
    return flat.reshape((coeffs.shape[1],) + block.shape[1:])


def biorthonormalize(grid: SpectralGrid, f_block: np.ndarray, g_block: np.ndarray,
                     drop_tol: float = 1e-13):
    """Modified Gram-Schmidt sweep enforcing <f_i, g_j> = delta_ij.

    Processes column pairs in order with one reorthogonalization pass.
    Pairs whose bilinear norm |<f, g>| falls below
    ``drop_tol * ||f|| * ||g||`` are dropped; the surviving count is
    returned as the rank.  Returns (f_out, g_out, rank).
    """
    f_block = np.asarray(f_block, dtype=float)
    g_block = np.asarray(g_block, dtype=float)
    if f_block.shape != g_block.shape:
        raise ValueError("f and g blocks must have identical shapes")
    k = f_block.shape[0]
    w = grid.quadrature_weight()
    kept_f, kept_g = [], []
    for i in range(k):
        f = f_block[i].copy()
        g = g_block[i].copy()
        # Drop decisions compare against the incoming column scales, so an
        # exactly dependent pair (which reduces to roundoff) is culled
        # rather than renormalized into noise.
        nf0 = np.sqrt(w) * np.linalg.norm(f.ravel())
        ng0 = np.sqrt(w) * np.linalg.norm(g.ravel())
        for _ in range(2):  # MGS plus one reorthogonalization pass
            for fj, gj in zip(kept_f, kept_g):
                f -= (w * np.vdot(gj, f)) * fj
                g -= (w * np.vdot(fj, g)) * gj
        s = w * np.vdot(g, f)
        if abs(s) <= drop_tol * nf0 * ng0 or nf0 == 0.0 or ng0 == 0.0:
            continue
        scale = 1.0 / np.sqrt(abs(s))
        kept_f.append(f * scale)
        kept_g.append(np.sign(s) * g * scale)
    rank = len(kept_f)
    if rank == 0:
        empty = np.zeros((0,) + f_block.shape[1:])
        return empty, empty.copy(), 0
    return np.stack(kept_f), np.stack(kept_g), rank


class _Deflator:
    """Metric-orthogonal projector against the generalized nullspace.

    The zero modes of the f-side pencil span the hplus-inverse images of
    the hminus kernel.  Their metric images are the kernel vectors
    themselves (hplus kernel_f = kernel_g), so the projection costs only
    inner products against kernel_g: no inverse application is involved.
    When hplus is singular on the kernel (interaction-free degeneracy) the
    zero modes are the kernel vectors themselves and the projection
    degenerates to the plain orthogonal one, again tested by kernel_g.
    """

    def __init__(self, grid: SpectralGrid, nullspace: NullspaceBasis):
        self.grid = grid
        self.kernel_g = nullspace.kernel_g
        self.singular = nullspace.hplus_singular
        basis = self.kernel_g if self.singular else nullspace.kernel_f
        self.basis = basis
        self.gram_inv = np.linalg.inv(_gram(grid, basis, self.kernel_g))

    def project(self, block: np.ndarray) -> np.ndarray:
        overlap = _gram(self.grid, block, self.kernel_g)
        coeff = overlap @ self.gram_inv.T
        return block - np.tensordot(coeff, self.basis, axes=(1, 0))

    def max_overlap(self, block: np.ndarray) -> float:
        if block.shape[0] == 0:
            return 0.0
        return float(np.max(np.abs(_gram(self.grid, block, self.kernel_g))))


def _whiten(metric: np.ndarray, rel_floor: float = 1e-12) -> np.ndarray:
    """Basis change making a symmetric positive metric the identity.

    Directions whose metric eigenvalue falls below ``rel_floor`` times the
    largest are dropped; returns the (possibly rectangular) transform T with
    T' M T = I.
    """
    metric = 0.5 * (metric + metric.T)
    evals, evecs = np.linalg.eigh(metric)
    keep = evals > rel_floor * max(evals[-1], np.finfo(float).tiny)
    return evecs[:, keep] / np.sqrt(evals[keep])


def solve_spectrum(ctx: BdgContext, nullspace: NullspaceBasis, opts: SolverOptions) -> SpectrumResult:
    """Compute the smallest positive excitation energies, matrix-free.

    Locally optimal block iteration on the forward-applied symmetric pencil
    with nullspace deflation; see the module docstring for the scheme.
    Raises PartialResultError carrying the converged modes if the outer
    iteration budget runs out, and ValueError when the block exceeds the
    grid's resolution.
    """
    grid = ctx.grid
    k = opts.block
    ndof = 2 * grid.total_points
    if k >= ndof:
        raise ValueError(
            f"block size {k} reaches the discrete dimension {ndof}; "
            "the grid cannot resolve that many modes"
        )
    t_start = time.perf_counter()
    w = grid.quadrature_weight()
    deflator = _Deflator(grid, nullspace)
    matvecs = 0

    def hplus_apply(block):
        nonlocal matvecs
        matvecs += block.shape[0]
        return ctx.apply_hplus(block)

    def hminus_apply(block):
        nonlocal matvecs
        matvecs += block.shape[0]
        return ctx.apply_hminus(block)

    precond_plus = _sandwich_preconditioner(ctx, "plus")
    precond_minus = _sandwich_preconditioner(ctx, "minus")

    def direction_precondition(block):
        # Inexact inverse of the shifted pencil operator: three loose solves
        # chain (hplus+1)^(-1) (hminus+1)^(-1) (hplus+1)^(-1).  Accuracy is
        # optional here, only the search-direction quality matters, so the
        # tolerance is coarse, the caps small and the solves non-strict.
        nonlocal matvecs

        def shifted_plus(b):
            return ctx.apply_hplus(b) + b

        def shifted_minus(b):
            return ctx.apply_hminus(b) + b

        total = 0
        out = block
        for op, pc in ((shifted_plus, precond_plus),
                       (shifted_minus, precond_minus),
                       (shifted_plus, precond_plus)):
            out, iters = _pcg(grid, op, out, 3e-2, 30, strict=False,
                              operator_name="shifted operator", precond=pc)
            total += iters
        matvecs += total
        return out

    def col_norms(block):
        flat = block.reshape(block.shape[0], -1)
        return np.sqrt(w * np.einsum("ki,ki->k", flat, flat))

    def lift(block):
        """Metric and operator images: (hplus x, hminus hplus x, hplus ...)."""
        b = hplus_apply(block)
        c = hminus_apply(b)
        a = hplus_apply(c)
        return b, c, a

    rng = np.random.default_rng(opts.seed)
    x = deflator.project(rng.standard_normal((k,) + (2,) + grid.shape))
    bx, cx, ax = lift(x)
    t = _whiten(_gram(grid, x, bx))
    x, bx, cx, ax = (_combine(arr, t) for arr in (x, bx, cx, ax))
    p = bp = cp = ap = None
    theta = np.zeros(k)

    iterations = 0
    converged = np.zeros(k, dtype=bool)
    for iterations in range(1, opts.max_outer + 1):
        # Rayleigh-Ritz rotation of the current block.
        proj = _gram(grid, x, ax)
        theta, rot = np.linalg.eigh(0.5 * (proj + proj.T))
        x, bx, cx, ax = (_combine(arr, rot) for arr in (x, bx, cx, ax))

        # Residual of the recovered (f, g) pair; the 1/(2 sqrt(omega))
        # anticipates the final pair normalization, so convergence is judged
        # on the residual the caller will see.
        omega = np.sqrt(np.clip(theta, 0.0, None))
        denom = np.maximum(omega, np.finfo(float).tiny)
        mode_res = col_norms(cx - _scale_cols(theta, x)) / (2.0 * np.sqrt(denom))
        converged = mode_res <= 0.5 * opts.tol * np.maximum(1.0, omega)
        if np.all(converged[: opts.n_ev]):
            break

        # New search directions from the preconditioned pencil residual,
        # deflated, metric-orthogonalized against the current block (the
        # cached metric images make that exact) and orthonormalized.
        active = ~converged
        residual = ax - _scale_cols(theta, bx)
        wdirs = direction_precondition(residual[active])
        wdirs = deflator.project(wdirs)
        wdirs = wdirs - _combine(x, _gram(grid, bx, wdirs))
        scale = col_norms(wdirs)
        wdirs = _scale_cols(1.0 / np.maximum(scale, np.finfo(float).tiny), wdirs)
        bw, cw, aw = lift(wdirs)
        tw = _whiten(_gram(grid, wdirs, bw))
        wdirs, bw, cw, aw = (_combine(arr, tw) for arr in (wdirs, bw, cw, aw))

        if p is not None:
            tp = _whiten(_gram(grid, p, bp))
            p, bp, cp, ap = (_combine(arr, tp) for arr in (p, bp, cp, ap))
        s = np.concatenate([x, wdirs] + ([p] if p is not None else []))
        b_s = np.concatenate([bx, bw] + ([bp] if p is not None else []))
        c_s = np.concatenate([cx, cw] + ([cp] if p is not None else []))
        a_s = np.concatenate([ax, aw] + ([ap] if p is not None else []))

        t = _whiten(_gram(grid, s, b_s))
        proj = t.T @ _gram(grid, s, a_s) @ t
        evals, evecs = np.linalg.eigh(0.5 * (proj + proj.T))
        coeff = t @ evecs[:, :k]
        coeff_p = coeff.copy()
        coeff_p[:k, :] = 0.0
        x, bx, cx, ax = (_combine(arr, coeff) for arr in (s, b_s, c_s, a_s))
        p, bp, cp, ap = (_combine(arr, coeff_p) for arr in (s, b_s, c_s, a_s))
        theta = evals[:k]
    else:
        modes = _finalize(ctx, x[converged], theta[converged], opts, deflator, strict=False)
        raise PartialResultError(
            f"spectrum iteration stalled after {opts.max_outer} steps with "
            f"{int(np.count_nonzero(converged[: opts.n_ev]))}/{opts.n_ev} modes converged",
            modes=modes,
            residual=float(np.max(mode_res[: opts.n_ev])),
        )

    modes = _finalize(ctx, x[: opts.n_ev], theta[: opts.n_ev], opts, deflator, strict=True)
    return SpectrumResult(
        modes=modes,
        nullspace=nullspace,
        iterations=iterations,
        matvec_count=matvecs,
        wall_time=time.perf_counter() - t_start,
    )


def _scale_cols(coeff: np.ndarray, block: np.ndarray) -> np.ndarray:
    return np.asarray(coeff).reshape((-1,) + (1,) * (block.ndim - 1)) * block


def _finalize(ctx, f_block, theta, opts, deflator, strict):
    """Recover (f, g) pairs, normalize, biorthonormalize and verify."""
    grid = ctx.grid
    nkeep = f_block.shape[0]
    if nkeep == 0:
        return []
    w = grid.quadrature_weight()
    omega = np.sqrt(np.clip(theta, 0.0, None))
    g_block = _scale_cols(1.0 / np.maximum(omega, np.finfo(float).tiny),
                          ctx.apply_hplus(f_block))
    # Joint pair scaling to <f, g> = 1/4 before the cleanup sweep.
    pairing = w * np.einsum(
        "ki,ki->k", f_block.reshape(nkeep, -1), g_block.reshape(nkeep, -1)
    )
    scale = 1.0 / (2.0 * np.sqrt(np.abs(pairing)))
    f_block = _scale_cols(scale, f_block)
    g_block = _scale_cols(scale, g_block)
    f_block, g_block, rank = biorthonormalize(grid, f_block, g_block)
    if rank != nkeep:
        raise StructureViolationError(
            f"biorthonormalization dropped {nkeep - rank} mode(s); "
            "returned eigenpairs are linearly dependent"
        )
    f_block *= 0.5
    g_block *= 0.5

    gram_fg = _gram(grid, f_block, g_block)
    hm_g = ctx.apply_hminus(g_block)
    hp_f = ctx.apply_hplus(f_block)
    modes = []
    for i in range(nkeep):
        f, g, om = f_block[i], g_block[i], float(omega[i])
        r1 = np.sqrt(w) * np.linalg.norm((hm_g[i] - om * f).ravel())
        r2 = np.sqrt(w) * np.linalg.norm((hp_f[i] - om * g).ravel())
        residual = float(r1 + r2)
        off = np.abs(gram_fg[i]).copy()
        off[i] = 0.0
        defect = float(np.max(off)) if nkeep > 1 else 0.0
        if strict and residual > opts.tol * max(1.0, om):
            raise StructureViolationError(
                f"mode {i} failed its residual bound after cleanup: "
                f"{residual:.3e} > {opts.tol * max(1.0, om):.3e}"
            )
        norm_defect = 4.0 * float(gram_fg[i, i]) - 1.0
        if strict and abs(norm_defect) > 1e-9:
            raise StructureViolationError(
                f"mode {i} normalization defect {norm_defect:.3e}"
            )
        f.setflags(write=False)
        g.setflags(write=False)
        u = f + g
        v = f - g
        u.setflags(write=False)
        v.setflags(write=False)
        modes.append(ModePair(omega=om, f=f, g=g, u=u, v=v,
                              residual=residual, biorth_defect=defect))
    if strict:
        # Deflation contract: the g amplitudes are metric-orthogonal to the
        # nullspace, <g_i, inv(hplus) kernel_j> = <f_i, kernel_j> / omega_i.
        cross = np.abs(_gram(grid, f_block, deflator.kernel_g))
        overlap = float(np.max(cross / np.maximum(omega[:, None], 1.0)))
        if overlap > 1e-9:
            raise StructureViolationError(
                f"returned modes leak into the deflated nullspace: {overlap:.3e}"
            )
    return modes


def check_biorthogonality(grid: SpectralGrid, modes):
    """Largest cross overlap <f_i, g_j> among modes of distinct energies.

    Pairs whose energies agree in magnitude to within the cluster tolerance
    are exempt (their overlap is not constrained).  Returns
    ``(max_defect, gram)`` where gram[i, j] = <f_i, g_j> for diagnostics.
    A single mode yields defect 0 by convention.
    """
    n = len(modes)
    if n == 0:
        return 0.0, np.zeros((0, 0))
    f_block = np.stack([m.f for m in modes])
    g_block = np.stack([m.g for m in modes])
    gram = _gram(grid, f_block, g_block)
    omegas = np.array([abs(m.omega) for m in modes])
    defect = 0.0
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            scale = max(omegas[i], omegas[j], 1.0)
            if abs(omegas[i] - omegas[j]) <= _CLUSTER_RTOL * scale:
                continue  # equal-magnitude exemption
            defect = max(defect, abs(float(gram[i, j])))
    return defect, gram


def assemble_dense_from_applier(ctx: BdgContext, which: str, limit: int = 4096) -> np.ndarray:
    """Materialize hplus/hminus by applying the matrix-free operator to unit vectors."""
    grid = ctx.grid
    ndof = 2 * grid.total_points
    if ndof > limit:
        raise ValueError(f"dense assembly needs {ndof} columns, above the limit {limit}")
    basis = np.eye(ndof).reshape((ndof, 2) + grid.shape)
    apply_fn = ctx.apply_hplus if which == "plus" else ctx.apply_hminus
    images = apply_fn(basis).reshape(ndof, ndof)
    return images.T  # images[j] is the j-th column


def dense_oracle_solve(ctx: BdgContext, limit: int = 4096):
    """Brute-force eigenpairs of the product operator on a small grid.

    Assembles both operators densely, solves the nonsymmetric product
    hminus*hplus with a general eigensolver, projects eigenvalues with
    imaginary part at most 1e-8 to the real line (larger parts violate the
    paired-spectrum structure and abort), and returns (omega, f, g) triples
    with positive omega sorted ascending.
    """
    grid = ctx.grid
    hp = assemble_dense_from_applier(ctx, "plus", limit)
    hm = assemble_dense_from_applier(ctx, "minus", limit)
    evals, evecs = scipy.linalg.eig(hm @ hp)
    if np.any(np.abs(evals.imag) > 1e-8):
        worst = evals[np.argmax(np.abs(evals.imag))]
        raise StructureViolationError(
            f"dense oracle produced genuinely complex eigenvalue {worst}; "
            "the paired-spectrum structure fails for these inputs"
        )
    lam = evals.real
    order = np.argsort(lam)
    w = grid.quadrature_weight()
    out = []
    for idx in order:
        if lam[idx] <= _ZERO_FLOOR**2:
            continue
        om = float(np.sqrt(lam[idx]))
        f = np.real(evecs[:, idx])
        g = (hp @ f) / om
        pairing = w * float(f @ g)
        scale = 1.0 / (2.0 * np.sqrt(abs(pairing)))
        f = (f * scale).reshape((2,) + grid.shape)
        g = (np.sign(pairing) * g * scale).reshape((2,) + grid.shape)
        out.append((om, f, g))
    return out


def dense_full_spectrum(ctx: BdgContext, limit: int = 4096) -> np.ndarray:
    """All eigenvalues of the full two-by-two block excitation operator.

    The block operator maps (f, g) to (hminus g, hplus f); its spectrum
    comes in (omega, -omega) pairs and carries the generalized nullspace at
    zero.  Returned unsorted as complex numbers.
    """
    grid = ctx.grid
    ndof = 2 * grid.total_points
    hp = assemble_dense_from_applier(ctx, "plus", limit)
    hm = assemble_dense_from_applier(ctx, "minus", limit)
    block = np.zeros((2 * ndof, 2 * ndof))
    block[:ndof, ndof:] = hm
    block[ndof:, :ndof] = hp
    return scipy.linalg.eigvals(block)


def zero_multiplicity(eigenvalues: np.ndarray, floor: float = _ZERO_FLOOR) -> int:
    """Count eigenvalues inside the zero cluster |lambda| <= floor."""
    return int(np.count_nonzero(np.abs(eigenvalues) <= floor))

"""Ground states of the coupled Gross-Pitaevskii energy.

Two constraint modes are supported.  With an internal Josephson junction
("jj", Rabi coupling active) the total mass is constrained, ||phi||^2 = 1,
and a single chemical potential mu appears.  Without the junction ("nojj",
Rabi coupling zero) each component's mass is conserved separately,
||phi_1||^2 = alpha and ||phi_2||^2 = 1 - alpha, with chemical potentials
mu_1 and mu_2.

The minimizer is a preconditioned projected gradient descent on the
constraint manifold: the Euler-Lagrange defect is preconditioned by the
Fourier-diagonal operator (alpha_p + kinetic)^(-1), projected onto the
tangent space, and stepped with a Barzilai-Borwein length safeguarded by
backtracking whenever the energy would increase beyond roundoff.  Iterates
are renormalized to the active constraint set after every update, so the
constraints hold exactly along the whole accepted sequence.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConvergenceError
from .spectral import (
    SpectralGrid,
    apply_fourier_multiplier,
    apply_laplacian,
    harmonic_potential,
    inner_product,
    kinetic_shift_inverse,
    norm,
)

__all__ = [
    "JJ",
    "NOJJ",
    "PhysParams",
    "GroundState",
    "energy",
    "energy_gradient",
    "apply_gpe_hamiltonian",
    "euler_lagrange_residual",
    "minimize_ground_state",
    "gaussian_pair",
]

JJ = "jj"
NOJJ = "nojj"

# Accepted energies may wiggle by a few ulps once the residual is near
# machine precision; steps inside this band count as non-increasing.
_ENERGY_SLACK = 1e-13


def _check_mode(mode: str) -> str:
    mode = str(mode).lower()
    if mode not in (JJ, NOJJ):
        raise ValueError(f"mode must be '{JJ}' or '{NOJJ}', got {mode!r}")
    return mode


@dataclass(frozen=True)
class PhysParams:
    """Physical constants of the two-component model.

    ``beta11, beta12, beta22`` are the (symmetric) interaction strengths,
    ``rabi`` the internal Josephson coupling Omega, ``raman`` the detuning
    delta, ``gamma`` the trap frequencies (one per dimension) and ``alpha``
    the first component's mass fraction, meaningful only when rabi == 0.
    """

    beta11: float
    beta12: float
    beta22: float
    rabi: float = 0.0
    raman: float = 0.0
    gamma: tuple = (1.0,)
    alpha: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "gamma", tuple(float(g) for g in np.atleast_1d(self.gamma)))
        if any(g <= 0 for g in self.gamma):
            raise ValueError("trap frequencies must be positive")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")

    @property
    def beta_matrix(self) -> np.ndarray:
        return np.array([[self.beta11, self.beta12], [self.beta12, self.beta22]])

    @property
    def dim(self) -> int:
        return len(self.gamma)


@dataclass(frozen=True)
class GroundState:
    """A converged constrained minimizer and its Lagrange data.

    ``phi`` is the real two-component field, shape (2,) + grid.shape.  In
    "jj" mode ``mu`` holds the single chemical potential and ``mu1``/``mu2``
    are None; in "nojj" mode it is the other way around.  ``residual`` is
    the weighted l2 norm of the Euler-Lagrange defect at return.  The
    instance is immutable and safe to share; do not write into ``phi``.
    """

    grid: SpectralGrid
    params: PhysParams
    mode: str
    phi: np.ndarray
    energy: float
    residual: float
    mu: float | None = None
    mu1: float | None = None
    mu2: float | None = None
    iterations: int = 0
    energy_history: np.ndarray = field(default_factory=lambda: np.zeros(0), repr=False)

    @property
    def chemical_potentials(self) -> tuple:
        if self.mode == JJ:
            return (self.mu,)
        return (self.mu1, self.mu2)


def _check_pair(grid: SpectralGrid, phi: np.ndarray) -> np.ndarray:
    phi = np.asarray(phi)
    if phi.shape != (2,) + grid.shape:
        raise ValueError(
            f"two-component field must have shape {(2,) + grid.shape}, got {phi.shape}"
        )
    return phi


def gaussian_pair(grid: SpectralGrid, params: PhysParams, masses=(0.5, 0.5), signs=(1.0, 1.0)) -> np.ndarray:
    """Normalized Gaussian pair: the beta = 0 harmonic ground state.

    Each component is the trap ground state (gamma/pi)^(1/4) exp(-gamma x^2 / 2)
    per direction, scaled so that the discrete component masses equal
    ``masses`` with the requested signs.
    """
    g = np.ones(grid.shape)
    for direction in range(grid.dim):
        gam = params.gamma[direction]
        x = grid.coordinate(direction)
        g = g * (gam / np.pi) ** 0.25 * np.exp(-0.5 * gam * x**2)
    g = g / norm(grid, g)
    return np.stack([s * np.sqrt(m) * g for m, s in zip(masses, signs)])


def _density_terms(grid: SpectralGrid, phi: np.ndarray, params: PhysParams):
    """Potential + interaction + detuning multipliers for each component."""
    v = harmonic_potential(grid, params.gamma)
    rho1 = np.abs(phi[0]) ** 2
    rho2 = np.abs(phi[1]) ** 2
    w1 = v + 0.5 * params.raman + params.beta11 * rho1 + params.beta12 * rho2
    w2 = v - 0.5 * params.raman + params.beta12 * rho1 + params.beta22 * rho2
    return w1, w2


def apply_gpe_hamiltonian(grid: SpectralGrid, phi: np.ndarray, params: PhysParams) -> np.ndarray:
    """Apply the coupled Gross-Pitaevskii operator (H_1 phi_1, H_2 phi_2).

    Includes the Rabi coupling Omega/2 between the components, evaluated at
    the densities of ``phi`` itself (the nonlinear eigenvalue operator).
    """
    phi = _check_pair(grid, phi)
    w1, w2 = _density_terms(grid, phi, params)
    kin = -0.5 * apply_laplacian(grid, phi)
    out = np.empty_like(kin)
    out[0] = kin[0] + w1 * phi[0] + 0.5 * params.rabi * phi[1]
    out[1] = kin[1] + w2 * phi[1] + 0.5 * params.rabi * phi[0]
    return out


def energy(grid: SpectralGrid, phi: np.ndarray, params: PhysParams) -> float:
    """Total mean-field energy of a (real or complex) two-component field.

    Kinetic + trap + two-body interaction + detuning + Rabi terms, evaluated
    with the spectral Laplacian and the lattice quadrature.
    """
    phi = _check_pair(grid, phi)
    v = harmonic_potential(grid, params.gamma)
    rho1 = np.abs(phi[0]) ** 2
    rho2 = np.abs(phi[1]) ** 2
    kinetic = -0.5 * np.real(inner_product(grid, apply_laplacian(grid, phi), phi))
    w = grid.quadrature_weight()
    potential = w * float(np.sum(v * (rho1 + rho2)))
    interaction = w * float(
        np.sum(
            0.5 * params.beta11 * rho1**2
            + params.beta12 * rho1 * rho2
            + 0.5 * params.beta22 * rho2**2
        )
    )
    detuning = 0.5 * params.raman * w * float(np.sum(rho1 - rho2))
    rabi = params.rabi * w * float(np.sum(np.real(phi[0] * np.conj(phi[1]))))
    return kinetic + potential + interaction + detuning + rabi


def energy_gradient(grid: SpectralGrid, phi: np.ndarray, params: PhysParams) -> np.ndarray:
    """Unconstrained energy gradient, 2 * H phi for real fields.

    Satisfies d/dt E(phi + t xi) = inner_product(grad, xi) at t = 0.
    """
    return 2.0 * apply_gpe_hamiltonian(grid, phi, params)


def _masses(grid: SpectralGrid, phi: np.ndarray):
    w = grid.quadrature_weight()
    return (
        w * float(np.sum(np.abs(phi[0]) ** 2)),
        w * float(np.sum(np.abs(phi[1]) ** 2)),
    )


def euler_lagrange_residual(grid: SpectralGrid, phi: np.ndarray, params: PhysParams, mode: str):
    """Defect of the stationary-state equations and the chemical potential(s).

    Returns ``(residual, mu)`` in "jj" mode and ``(residual, (mu1, mu2))``
    in "nojj" mode.  The chemical potentials are Rayleigh quotients of the
    nonlinear operator; the residual is the weighted l2 norm of
    H phi - mu phi (componentwise in "nojj" mode).  The candidate must
    satisfy the mode's mass constraints within 1e-10.
    """
    mode = _check_mode(mode)
    phi = _check_pair(grid, phi)
    hphi = apply_gpe_hamiltonian(grid, phi, params)
    m1, m2 = _masses(grid, phi)
    if mode == JJ:
        if abs(m1 + m2 - 1.0) > 1e-10:
            raise ValueError(f"total mass {m1 + m2} violates the unit constraint")
        mu = float(np.real(inner_product(grid, hphi, phi)))
        defect = hphi - mu * phi
        return norm(grid, defect), mu
    alpha = params.alpha
    if abs(m1 - alpha) > 1e-10 or abs(m2 - (1.0 - alpha)) > 1e-10:
        raise ValueError(
            f"component masses ({m1}, {m2}) violate the (alpha, 1-alpha) constraint"
        )
    mu1 = float(np.real(inner_product(grid, hphi[0], phi[0]))) / m1
    mu2 = float(np.real(inner_product(grid, hphi[1], phi[1]))) / m2
    defect = np.stack([hphi[0] - mu1 * phi[0], hphi[1] - mu2 * phi[1]])
    return norm(grid, defect), (mu1, mu2)


def _renormalize(grid: SpectralGrid, phi: np.ndarray, mode: str, alpha: float) -> np.ndarray:
    if mode == JJ:
        return phi / norm(grid, phi)
    m1, m2 = _masses(grid, phi)
    return np.stack(
        [phi[0] * np.sqrt(alpha / m1), phi[1] * np.sqrt((1.0 - alpha) / m2)]
    )


def _tangent_project(grid: SpectralGrid, d: np.ndarray, phi: np.ndarray, mode: str) -> np.ndarray:
    if mode == JJ:
        c = inner_product(grid, d, phi) / inner_product(grid, phi, phi)
        return d - c * phi
    out = np.empty_like(d)
    for j in range(2):
        c = inner_product(grid, d[j], phi[j]) / inner_product(grid, phi[j], phi[j])
        out[j] = d[j] - c * phi[j]
    return out


def minimize_ground_state(
    grid: SpectralGrid,
    params: PhysParams,
    mode: str = JJ,
    *,
    tol: float = 1e-13,
    max_iter: int = 50000,
    initial: np.ndarray | None = None,
) -> GroundState:
    """Minimize the mean-field energy on the constraint manifold.

    Stops when the weighted l2 norm of the Euler-Lagrange defect drops below
    ``tol`` (default 1e-13: downstream excitation computations need a
    near-machine-precision stationary state).  Raises ConvergenceError with
    the last residual if the budget runs out, and ValueError for the
    degenerate "nojj" constraints alpha in {0, 1}.
    """
    mode = _check_mode(mode)
    if mode == NOJJ and not 0.0 < params.alpha < 1.0:
        raise ValueError(
            f"degenerate constraint: nojj mode needs 0 < alpha < 1, got {params.alpha}"
        )

    if mode == JJ:
        masses = (0.5, 0.5)
        # The junction fixes the relative sign: with Omega > 0 the energy
        # favors phi_1 * phi_2 < 0.
        signs = (1.0, -np.sign(params.rabi) if params.rabi != 0 else 1.0)
    else:
        masses = (params.alpha, 1.0 - params.alpha)
        signs = (1.0, 1.0)

    if initial is None:
        phi = gaussian_pair(grid, params, masses=masses, signs=signs)
    else:
        phi = np.real(_check_pair(grid, initial)).astype(float)
    phi = _renormalize(grid, phi, mode, params.alpha)

    v = harmonic_potential(grid, params.gamma)
    precond = kinetic_shift_inverse(grid, float(np.max(v)))

    def defect(state):
        hphi = apply_gpe_hamiltonian(grid, state, params)
        if mode == JJ:
            mu = float(np.real(inner_product(grid, hphi, state)))
            return hphi - mu * state
        m1, m2 = _masses(grid, state)
        mu1 = float(np.real(inner_product(grid, hphi[0], state[0]))) / m1
        mu2 = float(np.real(inner_product(grid, hphi[1], state[1]))) / m2
        return np.stack([hphi[0] - mu1 * state[0], hphi[1] - mu2 * state[1]])

    def direction(state, res):
        d = apply_fourier_multiplier(grid, precond, res)
        return _tangent_project(grid, d, state, mode)

    e = energy(grid, phi, params)
    history = [e]
    r = defect(phi)
    res_norm = norm(grid, r)
    d = direction(phi, r)
    step = 0.5
    prev_phi = None
    prev_d = None
    it = 0

    while res_norm > tol and it < max_iter:
        it += 1
        if prev_phi is not None:
            s = phi - prev_phi
            y = d - prev_d
            sy = float(np.sum(s * y))
            if sy > 0:
                step = float(np.sum(s * s)) / sy
            else:
                step = 0.5
        step = min(max(step, 1e-8), 1e3)

        accepted = False
        trial_step = step
        for _ in range(40):
            trial = _renormalize(grid, phi - trial_step * d, mode, params.alpha)
            e_trial = energy(grid, trial, params)
            if e_trial <= e + _ENERGY_SLACK * max(1.0, abs(e)):
                accepted = True
                break
            trial_step *= 0.5
        if not accepted:
            # No resolvable decrease in any direction; the energy is flat to
            # roundoff, so take the smallest step and let the residual decide.
            trial = _renormalize(grid, phi - trial_step * d, mode, params.alpha)
            e_trial = energy(grid, trial, params)
            if e_trial > e + 10 * _ENERGY_SLACK * max(1.0, abs(e)):
                raise ConvergenceError(
                    f"line search failed at iteration {it} (residual {res_norm:.3e})",
                    residual=res_norm,
                )

        prev_phi, prev_d = phi, d
        phi = trial
        e = min(e_trial, e)  # recorded sequence stays non-increasing
        history.append(e)
        r = defect(phi)
        res_norm = norm(grid, r)
        d = direction(phi, r)

    if res_norm > tol:
        raise ConvergenceError(
            f"ground state did not reach residual {tol:.1e} in {max_iter} iterations "
            f"(last residual {res_norm:.3e})",
            residual=res_norm,
        )

    # Sign convention: nodeless components, phi_1 >= 0; with a junction the
    # second component carries -sign(Omega).
    w = grid.quadrature_weight()
    if mode == JJ:
        if w * float(np.sum(phi[0])) < 0:
            phi = -phi
    else:
        for j in range(2):
            if w * float(np.sum(phi[j])) < 0:
                phi = phi.copy()
                phi[j] = -phi[j]

    res_final, mus = euler_lagrange_residual(grid, phi, params, mode)
    e_final = energy(grid, phi, params)
    phi.setflags(write=False)
    history_arr = np.asarray(history)
    if mode == JJ:
        return GroundState(
            grid=grid, params=params, mode=mode, phi=phi, energy=e_final,
            residual=res_final, mu=mus, iterations=it, energy_history=history_arr,
        )
    return GroundState(
        grid=grid, params=params, mode=mode, phi=phi, energy=e_final,
        residual=res_final, mu1=mus[0], mu2=mus[1], iterations=it,
        energy_history=history_arr,
    )

"""Ground states and Bogoliubov-de Gennes excitations of two-component BECs.

A matrix-free Fourier pseudo-spectral suite: constrained energy
minimization for the coupled condensate ground state, FFT-based
application of the linearized excitation operators, a deflated block
eigensolver for the smallest excitation energies with bi-orthogonal
amplitude pairs, plus dense small-grid oracles, accuracy metrics and
file formats for the resulting fields and spectra.
"""

from .analysis import (
    ErrorReport,
    TimingSample,
    convergence_sweep,
    eigenvalue_error,
    loglog_slope,
    perturbed_density,
    run_pipeline,
    subspace_error,
    timing_study,
)
from .bdg import (
    BdgContext,
    NullspaceBasis,
    analytic_eigenpairs,
    apply_hminus,
    apply_hplus,
    apply_hplus_inverse,
    build_context,
    build_nullspace,
)
from .eigensolver import (
    ModePair,
    SolverOptions,
    SpectrumResult,
    biorthonormalize,
    check_biorthogonality,
    dense_full_spectrum,
    dense_oracle_solve,
    solve_spectrum,
    zero_multiplicity,
)
from .exceptions import (
    ConvergenceError,
    IndefiniteOperatorError,
    NullspaceVerificationError,
    PartialResultError,
    StructureViolationError,
)
from .fileio import (
    read_field,
    read_ground_state,
    read_spectrum_csv,
    write_field,
    write_ground_state,
    write_spectrum_csv,
)
from .groundstate import (
    JJ,
    NOJJ,
    GroundState,
    PhysParams,
    energy,
    energy_gradient,
    euler_lagrange_residual,
    gaussian_pair,
    minimize_ground_state,
)
from .spectral import (
    SpectralGrid,
    apply_laplacian,
    backward_transform,
    forward_transform,
    harmonic_potential,
    inner_product,
    make_grid,
    norm,
    spectral_derivative,
)

__version__ = "0.1.0"

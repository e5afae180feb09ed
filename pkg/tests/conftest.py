"""Shared fixtures: benchmark parameter sets and cached solve pipelines.

The heavy objects (converged ground states, spectra) are computed once per
session and shared across test modules; everything downstream treats them
as immutable.
"""

import numpy as np
import pytest

from becbdg import analysis as an
from becbdg import bdg, eigensolver as es
from becbdg import groundstate as gs
from becbdg import spectral as sp

BETAS = dict(beta11=100.0, beta12=94.0, beta22=97.0)


def jj_params(gamma=(1.0,)):
    return gs.PhysParams(**BETAS, rabi=1.0, raman=0.0, gamma=gamma)


def nojj_params(gamma=(1.0,), alpha=0.2):
    return gs.PhysParams(**BETAS, rabi=0.0, raman=0.0, gamma=gamma, alpha=alpha)


def free_params(gamma=(1.0,), alpha=0.2):
    """All interactions off: the analytic harmonic-oscillator case."""
    return gs.PhysParams(0.0, 0.0, 0.0, rabi=0.0, raman=0.0, gamma=gamma,
                         alpha=alpha)


@pytest.fixture(scope="session")
def pipeline_cache():
    """Memoized (params-key, mode, N) -> (ground, ctx, nullspace, spectrum)."""
    cache = {}

    def run(params, mode, n, n_ev=10, half_width=None, seed=0, block_size=None):
        key = (params, mode, n, n_ev, half_width, seed, block_size)
        if key not in cache:
            opts = es.SolverOptions(n_ev=n_ev, seed=seed, block_size=block_size)
            cache[key] = an.run_pipeline(
                params, mode, n, half_width=half_width, solver_opts=opts
            )
        return cache[key]

    return run


@pytest.fixture(scope="session")
def jj1d_128(pipeline_cache):
    return pipeline_cache(jj_params(), gs.JJ, 128)


@pytest.fixture(scope="session")
def jj1d_64(pipeline_cache):
    return pipeline_cache(jj_params(), gs.JJ, 64)


@pytest.fixture(scope="session")
def jj1d_ground_256():
    grid = sp.make_grid(1, 16, 256)
    return gs.minimize_ground_state(grid, jj_params(), gs.JJ)


@pytest.fixture(scope="session")
def jj1d_ctx_32():
    grid = sp.make_grid(1, 16, 32)
    ground = gs.minimize_ground_state(grid, jj_params(), gs.JJ)
    ctx = bdg.build_context(ground)
    return ctx


@pytest.fixture(scope="session")
def nojj1d_ctx_32():
    grid = sp.make_grid(1, 16, 32)
    ground = gs.minimize_ground_state(grid, nojj_params(), gs.NOJJ)
    ctx = bdg.build_context(ground)
    return ctx

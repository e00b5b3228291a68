"""Shared fixtures.  Heavy objects (assembled forms, eigenbases, Monte Carlo
ensembles) are session-scoped so the acceptance suite and the unit tests
reuse them instead of re-simulating."""

import numpy as np
import pytest

from fracburgers import (
    Field, FractionalOrder, Mesh, NoiseModel, assemble_form, convection_tensor,
    project, simulate_paths, solve_eigenbasis,
)


def sin_bump_values(mesh, scale=1.0):
    x = mesh.nodes
    return scale * np.sin(np.pi * (x + 1.0) / 2.0) * (1.0 - x**2)


@pytest.fixture(scope="session")
def form_128_a15():
    return assemble_form(Mesh(128), FractionalOrder(1.5))


@pytest.fixture(scope="session")
def form_64_a15():
    return assemble_form(Mesh(64), FractionalOrder(1.5))


@pytest.fixture(scope="session")
def basis16(form_128_a15):
    return solve_eigenbasis(form_128_a15, 16)


@pytest.fixture(scope="session")
def tensor16(basis16):
    return convection_tensor(basis16)


@pytest.fixture(scope="session")
def mc_additive_ensemble(form_128_a15, basis16, tensor16):
    """The shared stochastic production run: additive noise, 10^4 paths.

    Scaled initial data and dt = 5e-4 keep the O(dt) ledger bias of the
    drift-implicit scheme inside both the Ito balance band and the margin of
    the a priori envelope.
    """
    mesh = form_128_a15.mesh
    u0 = Field(mesh, sin_bump_values(mesh, scale=0.3))
    c0 = project(basis16, u0).c
    model = NoiseModel("additive", sigma=0.1, m=16)
    ens = simulate_paths(basis16, tensor16, model, c0, 5e-4, 1.0, 10000,
                         seed=20260823, n_checkpoints=10)
    return model, c0, ens


@pytest.fixture(scope="session")
def mode_ladder_ensembles(form_128_a15):
    """Zero-initial-data ensembles across the modal ladder with common noise.

    The noise dimension is pinned at 8 and every level reuses the same
    per-path streams, so the levels differ only through the Galerkin
    truncation (nested by construction: the noise enters the first
    min(8, n) modes).
    """
    model = NoiseModel("additive", sigma=0.1, m=8)
    out = {}
    for n in (8, 16, 32, 64):
        basis = solve_eigenbasis(form_128_a15, n)
        tensor = convection_tensor(basis)
        ens = simulate_paths(basis, tensor, model, np.zeros(n), 1e-3, 1.0,
                             2000, seed=771177, n_checkpoints=20,
                             store_coeffs=True)
        out[n] = (basis, ens)
    return model, out

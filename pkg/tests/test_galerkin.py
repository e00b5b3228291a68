import numpy as np
import pytest
from numpy.polynomial.legendre import leggauss

from fracburgers import (
    BlowUpError, Field, FractionalOrder, Mesh, MeshMismatchError, ModalState,
    ParameterError, assemble_form, convection_tensor, nonlinear_rhs, project,
    reconstruct, run_deterministic, solve_eigenbasis, step_deterministic,
)
from fracburgers.galerkin import DeterministicStepper, _phi_factors
from conftest import sin_bump_values


def test_eigenpairs_satisfy_generalized_problem(form_64_a15):
    basis = solve_eigenbasis(form_64_a15, 12)
    A, M = form_64_a15.A, form_64_a15.M
    for k in range(12):
        lhs = A @ basis.modes[:, k]
        rhs = basis.lambdas[k] * (M @ basis.modes[:, k])
        assert lhs == pytest.approx(rhs, abs=1e-9 * np.linalg.norm(lhs))
    assert np.all(np.diff(basis.lambdas) > 0.0)


def test_modes_are_mass_orthonormal(form_64_a15):
    basis = solve_eigenbasis(form_64_a15, 12)
    G = basis.modes.T @ (form_64_a15.M @ basis.modes)
    assert G == pytest.approx(np.eye(12), abs=1e-11)


def test_mode_signs_deterministic(form_64_a15):
    b1 = solve_eigenbasis(form_64_a15, 8)
    b2 = solve_eigenbasis(form_64_a15, 8)
    assert np.array_equal(b1.modes, b2.modes)
    # positive-mean convention
    means = form_64_a15.mesh.h * b1.modes.sum(axis=0)
    assert np.all((means > 0) | (np.abs(means) <= 1e-12))


def test_eigenvalue_scale(form_64_a15):
    # weighted form: lambda_1 exceeds the exterior-weight floor 4/alpha
    basis = solve_eigenbasis(form_64_a15, 1)
    assert basis.lambdas[0] > 4.0 / 1.5


def test_solve_eigenbasis_range_check(form_64_a15):
    with pytest.raises(ParameterError):
        solve_eigenbasis(form_64_a15, 0)
    with pytest.raises(ParameterError):
        solve_eigenbasis(form_64_a15, 64)


def test_project_reconstruct_roundtrip(form_64_a15):
    basis = solve_eigenbasis(form_64_a15, form_64_a15.mesh.n_nodes)
    rng = np.random.default_rng(2)
    u = Field(form_64_a15.mesh, rng.standard_normal(63))
    state = project(basis, u)
    back = reconstruct(basis, state)
    assert back.values == pytest.approx(u.values, abs=1e-10)
    with pytest.raises(MeshMismatchError):
        project(basis, Field(Mesh(32), np.zeros(31)))


def test_convection_matches_direct_quadrature(basis16):
    """N_k(c) equals -(u u_x, phi_k) integrated cell by cell."""
    tensor = convection_tensor(basis16)
    rng = np.random.default_rng(4)
    c = 0.5 * rng.standard_normal(16)
    N = nonlinear_rhs(tensor, c)

    mesh = basis16.mesh
    h = mesh.h
    gx, gw = leggauss(8)
    xl = mesh.all_nodes[:-1]
    xq = xl[:, None] + 0.5 * h * (gx[None, :] + 1.0)
    wq = 0.5 * h * gw
    v = reconstruct(basis16, ModalState(c)).padded()
    uq = v[:-1, None] + (v[1:] - v[:-1])[:, None] * (xq - xl[:, None]) / h
    ux = ((v[1:] - v[:-1]) / h)[:, None] * np.ones_like(xq)
    direct = []
    for k in range(16):
        pk = np.concatenate(([0.0], basis16.modes[:, k], [0.0]))
        pq = pk[:-1, None] + (pk[1:] - pk[:-1])[:, None] * (xq - xl[:, None]) / h
        direct.append(-np.sum((uq * ux * pq) @ wq))
    assert N == pytest.approx(np.asarray(direct), abs=1e-12 * max(np.abs(N).max(), 1))


def test_convection_cancellation(tensor16):
    rng = np.random.default_rng(8)
    for _ in range(20):
        c = rng.standard_normal(16)
        contraction = np.einsum("kij,k,i,j->", tensor16.T, c, c, c)
        scale = np.abs(c).max() ** 3 * np.abs(tensor16.T).sum()
        assert abs(contraction) <= 1e-13 * scale


def test_nonlinear_rhs_batch_matches_single(tensor16):
    rng = np.random.default_rng(6)
    batch = rng.standard_normal((5, 16))
    got = nonlinear_rhs(tensor16, batch)
    for p in range(5):
        assert got[p] == pytest.approx(nonlinear_rhs(tensor16, batch[p]), rel=1e-14)


def test_phi_factors_series_branch():
    lam = np.array([1e-9, 1e-3, 10.0])
    E, p1, p2 = _phi_factors(lam, 1e-3)
    z = lam * 1e-3
    assert E == pytest.approx(np.exp(-z), rel=1e-14)
    # p1 -> dt and p2 -> dt/2 as lambda dt -> 0
    assert p1[0] == pytest.approx(1e-3, rel=1e-9)
    assert p2[0] == pytest.approx(5e-4, rel=1e-9)
    assert np.all(np.isfinite(p2))


def test_linear_mode_integrates_exactly(basis16, tensor16):
    """With the nonlinear term suppressed the scheme is exact: e^{-lambda t}."""
    import copy

    zero_tensor = copy.deepcopy(tensor16)
    zero_tensor.T[:] = 0.0
    c0 = np.zeros(16)
    c0[0] = 1.0
    traj = run_deterministic(basis16, zero_tensor, c0, 1e-2, 0.1)
    expect = np.exp(-basis16.lambdas[0] * traj.times)
    assert traj.coeffs[:, 0] == pytest.approx(expect, rel=1e-12)


def test_etd2rk_second_order(basis16, tensor16):
    c0 = project(basis16, Field(basis16.mesh,
                                sin_bump_values(basis16.mesh))).c
    ref = run_deterministic(basis16, tensor16, c0, 1e-5, 0.02).coeffs[-1]
    errs = []
    for dt in (4e-4, 2e-4, 1e-4):
        got = run_deterministic(basis16, tensor16, c0, dt, 0.02).coeffs[-1]
        errs.append(np.linalg.norm(got - ref))
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates > 1.7)


def test_energy_dissipation_monotone(basis16, tensor16):
    c0 = project(basis16, Field(basis16.mesh,
                                sin_bump_values(basis16.mesh))).c
    traj = run_deterministic(basis16, tensor16, c0, 1e-3, 0.5)
    h2 = traj.h2()
    assert np.all(np.diff(h2) <= 1e-12)
    assert traj.v2()[0] > 0.0


def test_step_deterministic_matches_stepper(basis16, tensor16):
    c0 = 0.1 * np.ones(16)
    one = step_deterministic(ModalState(c=c0), 1e-3, basis16, tensor16)
    stepper = DeterministicStepper(basis16, tensor16, 1e-3)
    other = stepper.step(ModalState(c=c0))
    assert np.array_equal(one.c, other.c)
    assert one.t == pytest.approx(1e-3)


def test_blow_up_detected(basis16, tensor16):
    c0 = 1e4 * np.ones(16)
    with pytest.raises(BlowUpError) as err:
        run_deterministic(basis16, tensor16, c0, 0.5, 5.0,
                          scheme="exponential_euler")
    assert err.value.t is not None


def test_run_parameter_validation(basis16, tensor16):
    with pytest.raises(ParameterError):
        run_deterministic(basis16, tensor16, np.zeros(16), 1e-3, 0.0105)
    with pytest.raises(ParameterError):
        DeterministicStepper(basis16, tensor16, -1e-3)
    with pytest.raises(ParameterError):
        DeterministicStepper(basis16, tensor16, 1e-3, scheme="rk4")

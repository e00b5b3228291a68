import copy

import numpy as np
import pytest

from fracburgers import (
    BlowUpError, ModalState, NoiseModel, ParameterError, PathRng, hs_norm_sq,
    simulate_paths, stationary_ou_variance, step_sde, wiener_increment,
)
from fracburgers.stochastic import CHUNK_SIZE, default_spectrum
from conftest import sin_bump_values


def test_default_spectrum_decay_and_trace():
    q = default_spectrum(6, epsilon=0.1)
    assert q[0] == 1.0
    assert np.all(np.diff(q) < 0.0)
    assert q[5] == pytest.approx(6.0 ** (-1.1), rel=1e-14)
    # partial sums stay below the zeta-style bound 1 + 1/epsilon for any m
    for m in (1, 10, 500):
        assert default_spectrum(m, 0.1).sum() <= 1.0 + 1.0 / 0.1
    with pytest.raises(ParameterError):
        default_spectrum(0)
    with pytest.raises(ParameterError):
        default_spectrum(4, epsilon=0.0)


def test_noise_model_validation():
    with pytest.raises(ParameterError):
        NoiseModel("white", sigma=1.0, m=4)
    with pytest.raises(ParameterError):
        NoiseModel("additive", sigma=-1.0, m=4)
    with pytest.raises(ParameterError):
        NoiseModel("additive", sigma=1.0, m=4, q_spectrum=np.ones(3))


def test_growth_constants():
    add = NoiseModel("additive", sigma=0.5, m=3,
                     q_spectrum=np.array([1.0, 0.25, 1.0 / 9.0]))
    C, lam, L = add.growth_constants()
    assert (C, L) == (0.0, 0.0)
    assert lam == pytest.approx(0.25 * 49.0 / 36.0, rel=1e-14)
    mul = NoiseModel("linear_multiplicative", sigma=0.5, m=3)
    C, lam, L = mul.growth_constants()
    assert lam == 0.0
    assert C == pytest.approx(0.25, rel=1e-14)  # sigma^2 * max q
    assert L == pytest.approx(0.5, rel=1e-14)


def test_hs_norm_examples():
    model = NoiseModel("additive", sigma=1.0, m=3,
                       q_spectrum=np.array([1.0, 0.25, 1.0 / 9.0]))
    assert hs_norm_sq(model, ModalState(np.zeros(3))) == pytest.approx(49.0 / 36.0)
    zero = NoiseModel("additive", sigma=0.0, m=3)
    assert hs_norm_sq(zero, ModalState(np.ones(3))) == 0.0
    # truncation to the modal dimension
    assert hs_norm_sq(model, ModalState(np.zeros(2)), n_modes=2) == pytest.approx(1.25)


def test_hs_multiplicative_growth_bound():
    model = NoiseModel("linear_multiplicative", sigma=0.7, m=8)
    rng = np.random.default_rng(0)
    top = model.sigma**2 * model.q_spectrum.max()
    for _ in range(20):
        c = rng.standard_normal(8)
        assert hs_norm_sq(model, ModalState(c)) <= top * (c @ c) + 1e-14


def test_path_rng_reproducible_and_distinct():
    a = PathRng(42, 7).generator().standard_normal(16)
    b = PathRng(42, 7).generator().standard_normal(16)
    c = PathRng(42, 8).generator().standard_normal(16)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_wiener_increment_moments():
    model = NoiseModel("additive", sigma=1.0, m=3,
                       q_spectrum=np.array([1.0, 0.25, 1.0 / 9.0]))
    gen = PathRng(1, 0).generator()
    dt = 0.5
    draws = np.array([wiener_increment(model, dt, gen) for _ in range(100000)])
    var = draws.var(axis=0, ddof=1)
    target = model.q_spectrum * dt
    se = target * np.sqrt(2.0 / draws.shape[0])
    assert np.all(np.abs(var - target) <= 3.0 * se)
    cross = np.cov(draws[:, 0], draws[:, 1])[0, 1]
    se_cross = np.sqrt(target[0] * target[1] / draws.shape[0])
    assert abs(cross) <= 3.0 * se_cross
    with pytest.raises(ParameterError):
        wiener_increment(model, 0.0, gen)


def test_step_sde_zero_noise_single_mode(basis16, tensor16):
    """sigma = 0 reduces to the drift-implicit deterministic update."""
    model = NoiseModel("additive", sigma=0.0, m=16)
    zero_tensor = copy.deepcopy(tensor16)
    zero_tensor.T[:] = 0.0
    c0 = np.zeros(16)
    c0[0] = 1.0
    state = step_sde(ModalState(c=c0), 0.01, basis16, zero_tensor, model,
                     PathRng(0, 0).generator())
    assert state.c[0] == pytest.approx(1.0 / (1.0 + basis16.lambdas[0] * 0.01),
                                       rel=1e-14)
    assert np.all(state.c[1:] == 0.0)


def test_discrete_ou_stationary_variance(basis16, tensor16):
    """Mode-1 variance of the linear additive chain matches the exact
    fixed point of the implicit recursion."""
    zero_tensor = copy.deepcopy(tensor16)
    zero_tensor.T[:] = 0.0
    model = NoiseModel("additive", sigma=0.3, m=16)
    dt = 2e-3
    ens = simulate_paths(basis16, zero_tensor, model, np.zeros(16), dt, 4.0,
                         1500, seed=11, n_checkpoints=10, store_coeffs=True)
    late = ens.coeffs[:, -3:, 0].ravel()
    target = stationary_ou_variance(basis16.lambdas[0], model.q_spectrum[0],
                                    0.3, dt)
    got = late.var(ddof=1)
    se = target * np.sqrt(2.0 / late.size)
    assert abs(got - target) <= 3.0 * se


def test_ensemble_thread_invariance(basis16, tensor16):
    model = NoiseModel("additive", sigma=0.1, m=16)
    c0 = 0.1 * np.ones(16)
    kw = dict(dt=2e-3, t_final=0.05, n_paths=CHUNK_SIZE + 37, seed=5,
              n_checkpoints=5, store_coeffs=True)
    e1 = simulate_paths(basis16, tensor16, model, c0, workers=1, **kw)
    e2 = simulate_paths(basis16, tensor16, model, c0, workers=4, **kw)
    assert np.array_equal(e1.coeffs, e2.coeffs)
    assert np.array_equal(e1.bias, e2.bias)
    assert np.array_equal(e1.sup_h4, e2.sup_h4)


def test_single_path_matches_ensemble(basis16, tensor16):
    model = NoiseModel("linear_multiplicative", sigma=0.2, m=16)
    c0 = 0.2 * np.ones(16)
    dt = 1e-3
    ens = simulate_paths(basis16, tensor16, model, c0, dt, 0.02, 3, seed=9,
                         n_checkpoints=2, store_coeffs=True)
    for pid in range(3):
        gen = PathRng(9, pid).generator()
        state = ModalState(c=c0.copy())
        for _ in range(20):
            state = step_sde(state, dt, basis16, tensor16, model, gen)
        assert state.c == pytest.approx(ens.coeffs[pid, -1], rel=1e-12, abs=1e-15)


def test_ensemble_accumulators_consistent(basis16, tensor16):
    model = NoiseModel("additive", sigma=0.1, m=16)
    c0 = 0.3 * np.ones(16)
    ens = simulate_paths(basis16, tensor16, model, c0, 1e-3, 0.1, 16, seed=3,
                         n_checkpoints=10, store_coeffs=True)
    # h2 column matches the stored coefficients
    h2 = np.einsum("ptk,ptk->pt", ens.coeffs, ens.coeffs)
    assert h2 == pytest.approx(ens.h2, rel=1e-13)
    # integrals are non-decreasing, sup dominates the running h2^2
    assert np.all(np.diff(ens.v2_int, axis=1) >= 0.0)
    assert np.all(np.diff(ens.hs_int, axis=1) >= 0.0)
    assert np.all(ens.sup_h4 >= ens.h2**2 - 1e-14)
    # additive noise: hs integral is exact and path-independent
    lam_in = model.sigma**2 * model.q_spectrum.sum()
    assert ens.hs_int[:, -1] == pytest.approx(lam_in * 0.1, rel=1e-12)


def test_blow_up_reports_path_id(basis16, tensor16):
    model = NoiseModel("additive", sigma=0.0, m=16)
    bad = 1e9 * np.ones(16)
    with pytest.raises(BlowUpError) as err:
        simulate_paths(basis16, tensor16, model, bad, 0.1, 0.2, 3, seed=0,
                       n_checkpoints=2)
    assert err.value.path_id is not None
    assert err.value.t is not None


def test_simulate_parameter_validation(basis16, tensor16):
    model = NoiseModel("additive", sigma=0.1, m=16)
    with pytest.raises(ParameterError):
        simulate_paths(basis16, tensor16, model, np.zeros(16), 1e-3, 0.0105,
                       4, seed=0)
    with pytest.raises(ParameterError):
        simulate_paths(basis16, tensor16, model, np.zeros(16), 1e-3, 0.1,
                       4, seed=0, n_checkpoints=7)
    with pytest.raises(ParameterError):
        simulate_paths(basis16, tensor16, model, np.zeros(16), -1e-3, 0.1,
                       4, seed=0)

import numpy as np
import pytest
from scipy import integrate

from fracburgers import (
    AssemblyError, DomainError, Field, FractionalOrder, Mesh, MeshMismatchError,
    ParameterError, assemble_form, getoor_constant, mass_matrix, rho_weight,
    strong_image, symbol_factor,
)
from fracburgers.kernel import apply_operator, dump_matrix


def test_fractional_order_range():
    FractionalOrder(0.3)
    FractionalOrder(1.999)
    for bad in (0.0, 2.0, -0.5, 2.5):
        with pytest.raises(ParameterError):
            FractionalOrder(bad)


def test_mesh_geometry():
    mesh = Mesh(8)
    assert mesh.h == pytest.approx(0.25)
    assert mesh.n_nodes == 7
    assert np.allclose(mesh.all_nodes, np.linspace(-1, 1, 9))
    assert np.allclose(mesh.nodes, mesh.all_nodes[1:-1])
    with pytest.raises(ParameterError):
        Mesh(3)


def test_field_shape_and_interp():
    mesh = Mesh(8)
    with pytest.raises(MeshMismatchError):
        Field(mesh, np.zeros(5))
    u = Field(mesh, np.arange(7.0))
    padded = u.padded()
    assert padded[0] == 0.0 and padded[-1] == 0.0
    assert u(mesh.nodes[2]) == pytest.approx(2.0)
    # zero outside the domain
    assert u(1.5) == 0.0 and u(-3.0) == 0.0


def test_rho_weight_closed_form():
    alpha = FractionalOrder(1.5)
    x = 0.3
    expect = (2.0 / 1.5) * ((1.3) ** -1.5 + (0.7) ** -1.5)
    assert rho_weight(x, alpha) == pytest.approx(expect, rel=1e-15)
    assert rho_weight(0.0, FractionalOrder(1.0)) == pytest.approx(4.0)
    with pytest.raises(DomainError):
        rho_weight(1.0, alpha)
    with pytest.raises(DomainError):
        rho_weight(np.array([0.0, -1.2]), alpha)


def test_rho_weight_matches_exterior_integral():
    # definition: integral over the complement of (-1,1) of 2|x-y|^(-1-a) dy
    for a in (0.5, 1.0, 1.5):
        for x in (-0.7, 0.0, 0.42):
            left, _ = integrate.quad(
                lambda y: 2.0 * abs(x - y) ** (-1.0 - a), -np.inf, -1.0
            )
            right, _ = integrate.quad(
                lambda y: 2.0 * abs(x - y) ** (-1.0 - a), 1.0, np.inf
            )
            assert left + right == pytest.approx(
                rho_weight(x, FractionalOrder(a)), rel=1e-10
            )


def test_getoor_constant_values():
    assert getoor_constant(FractionalOrder(1.0)) == pytest.approx(1.0, rel=1e-14)
    # 2^a Gamma(a/2+1) Gamma((a+1)/2) / Gamma(1/2) at a = 0.5
    from scipy.special import gamma

    a = 0.5
    expect = 2**a * gamma(a / 2 + 1) * gamma((a + 1) / 2) / gamma(0.5)
    assert getoor_constant(FractionalOrder(a)) == pytest.approx(expect, rel=1e-13)


def test_symbol_factor_value_at_one():
    # at alpha = 1 the |xi|-normalized operator is 1/(2 pi) times this kernel
    assert symbol_factor(FractionalOrder(1.0)) == pytest.approx(
        1.0 / (2.0 * np.pi), rel=1e-13
    )


def test_mass_matrix_exact():
    mesh = Mesh(16)
    M = mass_matrix(mesh)
    h = mesh.h
    assert np.allclose(np.diag(M), 2 * h / 3)
    assert np.allclose(np.diag(M, 1), h / 6)
    # row sums pair each hat with the piecewise-linear all-ones field, which
    # equals 1 on interior supports and ramps to 0 in the boundary cells
    v = np.ones(mesh.n_nodes)
    expect = np.full(mesh.n_nodes, h)
    expect[0] = expect[-1] = 5.0 * h / 6.0
    assert M @ v == pytest.approx(expect, rel=1e-14)


def test_form_symmetry_toeplitz_and_pd():
    form = assemble_form(Mesh(32), FractionalOrder(1.5))
    A = form.A
    assert np.abs(A - A.T).max() == 0.0
    # constant-diagonal structure
    for k in range(3):
        d = np.diag(A, k)
        assert np.abs(d - d[0]).max() <= 1e-13 * abs(d[0])
    eigvals = np.linalg.eigvalsh(A)
    assert eigvals.min() > 0.0


def _hat(mesh, i):
    def f(x):
        ref = np.zeros(mesh.n_cells + 1)
        ref[i + 1] = 1.0
        return np.interp(x, mesh.all_nodes, ref, left=0.0, right=0.0)

    return f


def _brute_entry(mesh, alpha, i, j):
    """Independent adaptive-quadrature oracle for one bilinear-form entry."""
    a = alpha.alpha
    fi, fj = _hat(mesh, i), _hat(mesh, j)

    def inner(x):
        def g(y):
            if x == y:
                return 0.0
            return (fi(x) - fi(y)) * (fj(x) - fj(y)) * abs(x - y) ** (-1 - a)

        val = 0.0
        pts = sorted(set(list(mesh.all_nodes) + [x]))
        for lo, hi in zip(pts[:-1], pts[1:]):
            v, _ = integrate.quad(g, lo, hi, limit=200,
                                  points=[x] if lo < x < hi else None)
            val += v
        return val

    gag, _ = integrate.quad(inner, -1, 1, limit=200, points=list(mesh.all_nodes))
    wgt, _ = integrate.quad(
        lambda x: rho_weight(x, alpha) * fi(x) * fj(x),
        -1 + 1e-14, 1 - 1e-14, limit=400, points=list(mesh.nodes),
    )
    return gag + wgt


@pytest.mark.parametrize("a", [0.5, 1.5])
def test_assembled_entries_match_brute_force(a):
    alpha = FractionalOrder(a)
    mesh = Mesh(8)
    form = assemble_form(mesh, alpha)
    for i, j in [(0, 0), (0, 1), (1, 4)]:
        brute = _brute_entry(mesh, alpha, i, j)
        assert form.A[i, j] == pytest.approx(brute, rel=2e-9)


def test_rho_mass_is_tridiagonal_and_positive():
    form = assemble_form(Mesh(16), FractionalOrder(0.8))
    W = form.rho_mass
    off = np.triu(np.abs(W), 2)
    assert off.max() == 0.0
    assert np.all(np.diag(W) > 0.0)
    assert np.abs(W - W.T).max() == 0.0


def test_apply_operator_mesh_mismatch():
    form = assemble_form(Mesh(16), FractionalOrder(1.2))
    with pytest.raises(MeshMismatchError):
        apply_operator(form, Field(Mesh(32), np.zeros(31)))


def test_strong_image_solves_mass_system():
    form = assemble_form(Mesh(32), FractionalOrder(1.2))
    rng = np.random.default_rng(3)
    u = Field(form.mesh, rng.standard_normal(form.mesh.n_nodes))
    w = strong_image(form, u)
    assert form.M @ w.values == pytest.approx(form.A @ u.values, rel=1e-11)


@pytest.mark.parametrize("a", [0.5, 1.0, 1.5])
def test_constant_image_oracle(a):
    """(1-x^2)^(a/2) maps to a known constant after symbol normalization."""
    alpha = FractionalOrder(a)
    mesh = Mesh(512)
    form = assemble_form(mesh, alpha)
    u = Field(mesh, (1.0 - mesh.nodes**2) ** (a / 2.0))
    w = strong_image(form, u)
    inner = np.abs(mesh.nodes) <= 1.0 / 3.0
    img = symbol_factor(alpha) * w.values[inner]
    assert np.abs(img - getoor_constant(alpha)).max() < 5e-3


def test_dump_matrix_roundtrip(tmp_path):
    m = np.array([[1.0, np.pi], [-2.0e-17, 3.0]])
    path = tmp_path / "m.txt"
    dump_matrix(path, m)
    back = np.loadtxt(path)
    assert np.array_equal(back, m)

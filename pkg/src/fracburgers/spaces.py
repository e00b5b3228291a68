"""Weighted nonlocal Sobolev norms, spectral scales, and dual-norm machinery.

The Gagliardo seminorm here is evaluated by a quadrature path of its own (a
shift-correlation reduction of the D x D double integral), deliberately not
through the assembled stiffness matrix, so that the energy-identity split
v_norm^2 = gagliardo^2 + weighted_l2^2 is a genuine cross-check.
"""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import MeshMismatchError, ParameterError
from .galerkin import EigenBasis, project, project_dual
from .kernel import Field, NonlocalForm, _hat_overlap

GAGLIARDO_GAUSS_ORDER = 24


@dataclass
class NormReport:
    """The four norms of a field: L2, Gagliardo, rho-weighted L2, and energy."""

    l2: float
    gagliardo: float
    weighted_l2: float
    v_norm: float


def _shift_correlation(u: Field, z: np.ndarray) -> np.ndarray:
    """Exact values of Phi(z) = integral over (-1, 1-z) of (u(x+z) - u(x))^2 dx.

    Expands into boundary-truncated L2 terms plus the continuous
    autocorrelation of u, which for piecewise-linear u is the coefficient
    autocorrelation against the closed-form hat-overlap profile.
    """
    mesh = u.mesh
    h = mesh.h
    v = u.padded()  # nodal values incl. boundary zeros, length n_cells + 1
    vl, vr = v[:-1], v[1:]

    cell = h * (vl * vl + vl * vr + vr * vr) / 3.0  # per-cell integral of u^2
    total = cell.sum()
    # cumulative integral of u^2 over the k rightmost / leftmost full cells
    cum_right = np.concatenate(([0.0], np.cumsum(cell[::-1])))
    cum_left = np.concatenate(([0.0], np.cumsum(cell)))

    # coefficient autocorrelation for the correlation term
    w = np.correlate(v, v, mode="full")  # lag index d + (n_cells)

    z = np.asarray(z, dtype=float)
    k = np.minimum((z / h).astype(int), mesh.n_cells - 1)
    r = z - k * h

    def partial_from_edge(edge_value, far_value, rr):
        """Integral of u^2 over a segment of length rr inward from a cell edge."""
        slope = (far_value - edge_value) / h
        return rr * edge_value**2 + rr**2 * edge_value * slope + rr**3 * slope**2 / 3.0

    # right tail: k full cells counted from the right edge, then a partial
    # piece of the next cell measured inward from its right edge
    s_right = cum_right[k] + partial_from_edge(v[mesh.n_cells - k], v[mesh.n_cells - 1 - k], r)
    s_left = cum_left[k] + partial_from_edge(v[k], v[k + 1], r)

    # correlation C(z) = sum_d w_d psi(z - d h); only |z - d h| < 2h contributes
    base = k - 1
    lags = base[:, None] + np.arange(4)[None, :]
    valid = (lags >= -(mesh.n_cells)) & (lags <= mesh.n_cells)
    widx = np.clip(lags + mesh.n_cells, 0, w.size - 1)
    psi = h * _hat_overlap((z[:, None] - lags * h) / h)
    corr = np.where(valid, w[widx] * psi, 0.0).sum(axis=1)

    return (total - s_left) + (total - s_right) - 2.0 * corr


def gagliardo_seminorm_sq(u: Field, alpha_value: float,
                          gauss_order: int = GAGLIARDO_GAUSS_ORDER) -> float:
    """D x D double integral of (u(x)-u(y))^2 |x-y|^(-1-alpha), exactly.

    Reduced to 2 * integral over z in (0, 2) of Phi(z) z^(-1-alpha) dz with
    Phi the shift correlation, a piecewise cubic with knots at multiples of h.
    The first piece vanishes to second order at z = 0 and is integrated via
    its z^2/z^3 expansion; the rest by Gauss-Legendre per piece.
    """
    mesh = u.mesh
    h = mesh.h
    a = alpha_value

    # piece (0, h): Phi = c2 z^2 + c3 z^3
    z1, z2 = h / 3.0, 2.0 * h / 3.0
    f1, f2 = _shift_correlation(u, np.array([z1, z2]))
    det = z1**2 * z2**2 * (z2 - z1)
    c2 = (f1 * z2**3 - f2 * z1**3) / det
    c3 = (f2 * z1**2 - f1 * z2**2) / det
    acc = c2 * h ** (2.0 - a) / (2.0 - a) + c3 * h ** (3.0 - a) / (3.0 - a)

    # pieces [kh, (k+1)h], k >= 1
    gx, gw = leggauss(gauss_order)
    k = np.arange(1, mesh.n_cells)
    zz = (k[:, None] + 0.5 + 0.5 * gx[None, :]) * h
    flat = zz.ravel()
    phi = _shift_correlation(u, flat).reshape(zz.shape)
    vals = phi * flat.reshape(zz.shape) ** (-1.0 - a)
    acc += 0.5 * h * (vals @ gw).sum()
    return float(2.0 * acc)


def norms(u: Field, form: NonlocalForm) -> NormReport:
    """All four norms of a field; the Gagliardo entry uses the quadrature path."""
    if u.mesh.n_cells != form.mesh.n_cells:
        raise MeshMismatchError("field and form live on different meshes")
    v = u.values
    l2_sq = float(v @ (form.M @ v))
    w_sq = float(v @ (form.rho_mass @ v))
    v_sq = float(v @ (form.A @ v))
    g_sq = gagliardo_seminorm_sq(u, form.alpha.alpha, form.gauss_order)
    return NormReport(
        l2=np.sqrt(l2_sq),
        gagliardo=np.sqrt(max(g_sq, 0.0)),
        weighted_l2=np.sqrt(w_sq),
        v_norm=np.sqrt(v_sq),
    )


@dataclass
class SpectralScale:
    """Fractional norm scale realized through powers of the discrete spectrum.

    ||u||_(s)^2 = sum_k lambda_k^(2s/alpha) u_hat_k^2 for modal coefficients;
    s = alpha/2 reproduces the energy norm on the span of the basis.  Negative
    orders (dual norms) use the inverse powers on dual-vector coefficients.
    """

    basis: EigenBasis

    def norm_sq(self, modal: np.ndarray, s: float) -> float:
        a = self.basis.alpha.alpha
        return float(np.sum(self.basis.lambdas ** (2.0 * s / a) * modal**2))

    def field_norm(self, u: Field, s: float) -> float:
        return float(np.sqrt(self.norm_sq(project(self.basis, u).c, s)))


def dual_norm(w: np.ndarray, scale: SpectralScale, s: float) -> float:
    """Negative-order norm of a dual vector through the spectral scale."""
    if s <= 0.0:
        raise ParameterError(f"dual order s must be positive, got {s}")
    modal = project_dual(scale.basis, w)
    return float(np.sqrt(scale.norm_sq(modal, -s)))


def dual_norm_modal(modal: np.ndarray, scale: SpectralScale, s: float):
    """Dual norm from modal dual coefficients; broadcasts over leading axes."""
    if s <= 0.0:
        raise ParameterError(f"dual order s must be positive, got {s}")
    a = scale.basis.alpha.alpha
    weights = scale.basis.lambdas ** (-2.0 * s / a)
    return np.sqrt(np.sum(weights * np.asarray(modal) ** 2, axis=-1))


def operator_dual_bound_check(u: Field, form: NonlocalForm,
                              scale: SpectralScale) -> float:
    """Ratio of the dual norm of A u to the energy norm of u; at most 1 + eps.

    On the span of the basis the ratio is exactly 1 (the discrete sharp form
    of the continuous duality bound); truncation can only shrink it.
    """
    v = u.values
    v_sq = float(v @ (form.A @ v))
    if v_sq == 0.0:
        raise ParameterError("dual bound ratio is undefined for the zero field")
    img = form.A @ v
    num = dual_norm(img, scale, form.alpha.alpha / 2.0)
    return num / np.sqrt(v_sq)

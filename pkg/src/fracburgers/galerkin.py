"""Eigenbasis of the nonlocal operator and the deterministic Galerkin dynamics.

The basis diagonalizes the weighted stiffness against the mass matrix, the
convection tensor carries the energy-conserving skew form of u u_x, and time
stepping is exponential-IMEX: the stiff linear part is integrated by its exact
factor, the nonlinear term explicitly.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from .errors import BlowUpError, EigenSolverError, MeshMismatchError, ParameterError
from .kernel import Field, FractionalOrder, Mesh, NonlocalForm

BLOWUP_LIMIT = 1e8
EIGEN_RESIDUAL_TOL = 1e-9


@dataclass
class EigenBasis:
    """Discrete eigenpairs A phi_k = lambda_k M phi_k, M-orthonormal, ascending."""

    mesh: Mesh
    alpha: FractionalOrder
    lambdas: np.ndarray  # (n_modes,)
    modes: np.ndarray  # (n_nodes, n_modes), columns M-orthonormal
    M: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.lambdas.size


@dataclass
class ModalState:
    """Modal coefficients at one time instant."""

    c: np.ndarray
    t: float = 0.0


@dataclass
class ConvectionTensor:
    """Entries T[k, i, j] of the skew-symmetrized trilinear convection form."""

    T: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.T.shape[0]


def solve_eigenbasis(form: NonlocalForm, n_modes: int) -> EigenBasis:
    """Generalized symmetric-definite eigensolve with deterministic signs.

    Modes are sorted by eigenvalue ascending and flipped so that each has
    positive mean (positive first nodal value on a near-zero mean).
    """
    n = form.mesh.n_nodes
    if not (1 <= n_modes <= n):
        raise ParameterError(f"n_modes must lie in [1, {n}], got {n_modes}")
    try:
        lam, vec = eigh(form.A, form.M, subset_by_index=[0, n_modes - 1])
    except Exception as exc:  # pragma: no cover - depends on LAPACK failure
        raise EigenSolverError(f"generalized eigensolver failed: {exc}") from exc

    resid = np.linalg.norm(form.A @ vec - form.M @ vec * lam, axis=0)
    scale = np.linalg.norm(form.A @ vec, axis=0)
    worst = (resid / scale).max()
    if worst > EIGEN_RESIDUAL_TOL:
        raise EigenSolverError(
            f"eigenpair residual {worst:.3e} exceeds {EIGEN_RESIDUAL_TOL:.0e}"
        )

    means = form.mesh.h * vec.sum(axis=0)
    signs = np.where(
        np.abs(means) > 1e-12, np.sign(means), np.sign(vec[0, :])
    )
    signs[signs == 0.0] = 1.0
    return EigenBasis(
        mesh=form.mesh, alpha=form.alpha, lambdas=lam, modes=vec * signs, M=form.M
    )


def project(basis: EigenBasis, u: Field) -> ModalState:
    """Orthogonal projection onto the modal span: c_k = phi_k^T M u."""
    if u.mesh.n_cells != basis.mesh.n_cells:
        raise MeshMismatchError("field and basis live on different meshes")
    return ModalState(c=basis.modes.T @ (basis.M @ u.values))


def project_dual(basis: EigenBasis, w: np.ndarray) -> np.ndarray:
    """Modal coefficients of a dual vector (a functional acting as w^T v)."""
    return basis.modes.T @ np.asarray(w, dtype=float)


def reconstruct(basis: EigenBasis, state: ModalState) -> Field:
    """Nodal field sum_k c_k phi_k."""
    return Field(basis.mesh, basis.modes @ state.c)


def convection_tensor(basis: EigenBasis) -> ConvectionTensor:
    """Skew-symmetrized convection entries, exact for piecewise-linear modes.

    T[k, i, j] = (1/3) [ (phi_i phi_j', phi_k) - (phi_i phi_k', phi_j) ].
    The 1/3 prefactor makes the contraction against repeated arguments both
    vanish identically and stay consistent with the quadratic flux: pairing
    with any test mode w reproduces -(1/2)(u^2, w_x) for u in the span.
    """
    h = basis.mesh.h
    k = basis.n_modes
    padded = np.vstack(
        [np.zeros((1, k)), basis.modes, np.zeros((1, k))]
    )  # (n_cells + 1, k)
    vl = padded[:-1, :]  # left nodal value per cell
    vr = padded[1:, :]
    slopes = (vr - vl) / h  # (n_cells, k)

    # per-cell L2 pairing of two piecewise-linear modes
    pair = (h / 6.0) * (
        2.0 * np.einsum("ci,cw->ciw", vl, vl)
        + np.einsum("ci,cw->ciw", vl, vr)
        + np.einsum("ci,cw->ciw", vr, vl)
        + 2.0 * np.einsum("ci,cw->ciw", vr, vr)
    )
    # C[i, v, w] = (phi_i phi_v', phi_w)
    C = np.einsum("cv,ciw->ivw", slopes, pair)
    T = (C.transpose(2, 0, 1) - C.transpose(1, 0, 2)) / 3.0
    return ConvectionTensor(T=T)


def nonlinear_rhs(tensor: ConvectionTensor, c: np.ndarray) -> np.ndarray:
    """Modal convection term N(c) with N_k = -sum_ij T[k,i,j] c_i c_j.

    Accepts a single coefficient vector or a batch with shape (paths, modes).
    """
    T = tensor.T
    if c.ndim == 1:
        return -np.einsum("kij,i,j->k", T, c, c)
    tc = np.tensordot(c, T, axes=([1], [1]))  # (p, k, j)
    return -np.einsum("pkj,pj->pk", tc, c)


def _phi_factors(lam: np.ndarray, dt: float):
    """Exponential factor and the two phi-function weights for the step."""
    z = lam * dt
    E = np.exp(-z)
    p1 = -np.expm1(-z) / lam  # dt * phi1(-z) = (1 - e^-z) / lambda
    # dt * phi2(-z) = (e^-z - 1 + z) / (lambda^2 dt), series for tiny z
    small = z < 1e-5
    with np.errstate(invalid="ignore", divide="ignore"):
        p2 = (np.expm1(-z) + z) / (lam**2 * dt)
    p2 = np.where(small, dt * (0.5 - z / 6.0 + z**2 / 24.0), p2)
    return E, p1, p2


class DeterministicStepper:
    """Exponential integrator for dc_k/dt = -lambda_k c_k + N_k(c).

    ``etd2rk`` (default) is the two-stage exponential scheme with an explicit
    predictor-corrector on the nonlinear term; ``exponential_euler`` is the
    one-stage variant.
    """

    def __init__(self, basis: EigenBasis, tensor: ConvectionTensor, dt: float,
                 scheme: str = "etd2rk"):
        if dt <= 0.0:
            raise ParameterError(f"dt must be positive, got {dt}")
        if scheme not in ("etd2rk", "exponential_euler"):
            raise ParameterError(f"unknown scheme {scheme!r}")
        self.basis = basis
        self.tensor = tensor
        self.dt = dt
        self.scheme = scheme
        self.E, self.p1, self.p2 = _phi_factors(basis.lambdas, dt)

    def step(self, state: ModalState) -> ModalState:
        c = state.c
        n1 = nonlinear_rhs(self.tensor, c)
        pred = self.E * c + self.p1 * n1
        if self.scheme == "etd2rk":
            n2 = nonlinear_rhs(self.tensor, pred)
            new = pred + self.p2 * (n2 - n1)
        else:
            new = pred
        t_new = state.t + self.dt
        if not np.all(np.isfinite(new)) or np.abs(new).max() > BLOWUP_LIMIT:
            norm = float(np.abs(new[np.isfinite(new)]).max()) if np.isfinite(new).any() else np.inf
            raise BlowUpError(
                f"deterministic step blew up at t={t_new:.6g} (|c|_inf={norm:.3e})",
                t=t_new, norm=norm,
            )
        return ModalState(c=new, t=t_new)


def step_deterministic(state: ModalState, dt: float, basis: EigenBasis,
                       tensor: ConvectionTensor, scheme: str = "etd2rk") -> ModalState:
    """One exponential-IMEX step; see DeterministicStepper for reuse across steps."""
    return DeterministicStepper(basis, tensor, dt, scheme).step(state)


@dataclass
class Trajectory:
    """Uniform-in-time modal trajectory with the operator spectrum attached."""

    times: np.ndarray  # (n_steps + 1,)
    coeffs: np.ndarray  # (n_steps + 1, n_modes)
    lambdas: np.ndarray

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def h2(self) -> np.ndarray:
        """Squared L2 norm per stored time."""
        return np.einsum("mk,mk->m", self.coeffs, self.coeffs)

    def v2(self) -> np.ndarray:
        """Squared energy (V) norm per stored time."""
        return np.einsum("mk,mk,k->m", self.coeffs, self.coeffs, self.lambdas)


def run_deterministic(basis: EigenBasis, tensor: ConvectionTensor, c0: np.ndarray,
                      dt: float, t_final: float, scheme: str = "etd2rk") -> Trajectory:
    """Integrate the deterministic Galerkin system and record every step."""
    n_steps = int(round(t_final / dt))
    if abs(n_steps * dt - t_final) > 1e-9 * max(t_final, 1.0):
        raise ParameterError(f"t_final={t_final} is not an integer multiple of dt={dt}")
    stepper = DeterministicStepper(basis, tensor, dt, scheme)
    coeffs = np.empty((n_steps + 1, basis.n_modes))
    coeffs[0] = c0
    state = ModalState(c=np.asarray(c0, dtype=float), t=0.0)
    for m in range(n_steps):
        state = stepper.step(state)
        coeffs[m + 1] = state.c
    times = dt * np.arange(n_steps + 1)
    return Trajectory(times=times, coeffs=coeffs, lambdas=basis.lambdas.copy())

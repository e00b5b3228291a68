"""Executable estimates: energy ledgers, Gronwall envelopes, time-regularity
seminorms, weak-form residuals, and self-convergence studies.

Everything here is post-processing over immutable trajectories or Monte Carlo
ensembles; each check returns a verdict record carrying the measured quantity
and the threshold it was held against.
"""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ParameterError
from .galerkin import Trajectory
from .kernel import Field, FractionalOrder, NonlocalForm, rho_weight
from .spaces import SpectralScale
from .stochastic import NoiseModel, SdeEnsemble


@dataclass
class CheckVerdict:
    """Machine-readable outcome of one diagnostic check."""

    check_id: str
    quantity: float
    threshold: float
    passed: bool

    @property
    def verdict(self) -> str:
        return "pass" if self.passed else "fail"


@dataclass
class EnergyLedger:
    """Running energy bookkeeping of one run (or of a Monte Carlo mean).

    ``h2`` is the squared L2 norm per stored time, ``v2_integral`` and
    ``hs_integral`` trapezoid accumulations of the squared energy norm and of
    the squared Hilbert-Schmidt intensity, and ``band`` the allowance the
    balance residual is held to (statistical error plus declared step bias).
    """

    times: np.ndarray
    h2: np.ndarray
    v2_integral: np.ndarray
    hs_integral: np.ndarray
    band: np.ndarray

    def residual(self) -> np.ndarray:
        return self.h2 - self.h2[0] + 2.0 * self.v2_integral - self.hs_integral


def ledger_from_trajectory(traj: Trajectory, tol: float) -> EnergyLedger:
    """Deterministic ledger: dissipation only, fixed tolerance band."""
    h2 = traj.h2()
    v2 = traj.v2()
    dt = traj.dt
    v2_int = np.concatenate(([0.0], np.cumsum(0.5 * dt * (v2[1:] + v2[:-1]))))
    return EnergyLedger(
        times=traj.times,
        h2=h2,
        v2_integral=v2_int,
        hs_integral=np.zeros_like(h2),
        band=np.full_like(h2, tol),
    )


def ledger_from_ensemble(ens: SdeEnsemble, n_se: float = 3.0) -> EnergyLedger:
    """Monte Carlo mean ledger with a (n_se x SE + mean bias bound) band."""
    X = ens.balance_residual()
    se = X.std(axis=0, ddof=1) / np.sqrt(ens.n_paths)
    return EnergyLedger(
        times=ens.times,
        h2=ens.h2.mean(axis=0),
        v2_integral=ens.v2_int.mean(axis=0),
        hs_integral=ens.hs_int.mean(axis=0),
        band=n_se * se + ens.bias.mean(axis=0),
    )


def check_energy_balance(ledger: EnergyLedger, kind: str) -> CheckVerdict:
    """Hold |H2(t) - H2(0) + 2 int V2 - int HS| inside the ledger band."""
    if kind not in ("deterministic", "stochastic-mean"):
        raise ParameterError(f"unknown balance kind {kind!r}")
    if ledger.times.size == 0:
        raise ParameterError("empty energy ledger")
    resid = np.abs(ledger.residual())
    margin = resid - ledger.band
    # the residual is identically zero at t = 0; report the tightest later time
    worst = int(np.argmax(margin[1:])) + 1 if margin.size > 1 else 0
    return CheckVerdict(
        check_id=f"energy_balance_{kind}",
        quantity=float(resid[worst]),
        threshold=float(ledger.band[worst]),
        passed=bool(np.all(margin <= 0.0)),
    )


def gronwall_envelope(h2_initial: float, model: NoiseModel, t_final: float) -> float:
    """Explicit a priori majorant e^{C T} (||u_0||^2 + lam T) for sup_t E||u||^2.

    (C, lam) are the linear-growth constants the noise model reports; with
    zero noise the bound collapses to plain dissipation of the initial energy.
    """
    if model is None:
        return float(h2_initial)
    big_c, lam, _ = model.growth_constants()
    return float(np.exp(big_c * t_final) * (h2_initial + lam * t_final))


@dataclass
class BesovEstimate:
    """Discrete time-regularity seminorm in a negative-order spatial norm."""

    gamma: float
    delta: float
    seminorm_sq: np.ndarray  # per path
    l2_part: np.ndarray  # per path

    def total(self) -> np.ndarray:
        return self.seminorm_sq + self.l2_part


def besov_estimate(coeffs: np.ndarray, times: np.ndarray, scale: SpectralScale,
                   gamma: float, delta: float) -> BesovEstimate:
    """Besov-Slobodetski estimator on a uniformly stored modal trajectory.

    seminorm_sq = sum over m != l of ||u(t_m) - u(t_l)||^2_(-delta)
    |t_m - t_l|^(-1-2 gamma) dt^2, plus the time-L2 part in the same
    negative-order norm.  ``coeffs`` may be one trajectory (times, modes) or a
    path batch (paths, times, modes); results are per path.
    """
    if not (0.0 < gamma < 0.5):
        raise ParameterError(f"gamma must lie in (0, 1/2), got {gamma}")
    if delta <= 0.0:
        raise ParameterError(f"delta must be positive, got {delta}")
    C = np.asarray(coeffs, dtype=float)
    single = C.ndim == 2
    if single:
        C = C[None, :, :]
    times = np.asarray(times, dtype=float)
    dt = times[1] - times[0]
    a = scale.basis.alpha.alpha
    w = scale.basis.lambdas ** (-2.0 * delta / a)

    G = C * np.sqrt(w)  # weighted coefficients: plain Euclidean geometry now
    sq = np.einsum("ptk,ptk->pt", G, G)
    l2_part = dt * sq.sum(axis=1)

    gram = np.einsum("pmk,plk->pml", G, G)
    d2 = sq[:, :, None] + sq[:, None, :] - 2.0 * gram
    gaps = np.abs(times[:, None] - times[None, :])
    with np.errstate(divide="ignore"):
        kern = gaps ** (-1.0 - 2.0 * gamma)
    np.fill_diagonal(kern, 0.0)
    semi = dt**2 * np.einsum("pml,ml->p", np.maximum(d2, 0.0), kern)

    if single:
        semi, l2_part = semi, l2_part
    return BesovEstimate(gamma=gamma, delta=delta, seminorm_sq=semi, l2_part=l2_part)


@dataclass
class TestFunction:
    """Analytic test function with the derivatives the weak form needs."""

    __test__ = False  # keep pytest from collecting this as a test container

    label: str
    f: callable
    fx: callable
    fxx: callable


def polynomial_bump() -> TestFunction:
    """The default weak-form test function (1 - x^2)^2."""
    return TestFunction(
        label="poly_bump",
        f=lambda x: (1.0 - x**2) ** 2,
        fx=lambda x: -4.0 * x * (1.0 - x**2),
        fxx=lambda x: 12.0 * x**2 - 4.0,
    )


def _validate_test_function(phi: TestFunction, alpha_value: float) -> None:
    """Reject test functions outside the admissible weighted-C2 class.

    Admissibility here is what keeps every pairing in the weak identity
    finite: zero boundary values, a bounded second derivative up to the
    closure, and a bounded product of the test function with the singular
    boundary weight (the killing term of the nonlocal operator), which forces
    decay at rate at least dist(x, boundary)^alpha.
    """
    for edge in (-1.0, 1.0):
        if abs(phi.f(edge)) > 1e-12:
            raise ParameterError(
                f"test function {phi.label!r} rejected: nonzero boundary value "
                f"{phi.f(edge):.3e} at x={edge:+.0f}"
            )
    x = np.concatenate([
        1.0 - np.geomspace(1e-9, 1.0, 200)[:-1],
        -1.0 + np.geomspace(1e-9, 1.0, 200)[:-1],
        np.linspace(-0.999, 0.999, 101),
    ])
    fxx = np.asarray(phi.fxx(x))
    if not np.all(np.isfinite(fxx)) or np.abs(fxx).max() > 1e8:
        raise ParameterError(
            f"test function {phi.label!r} rejected: second derivative "
            "unbounded on the domain"
        )
    killing = rho_weight(x, FractionalOrder(alpha_value)) * np.asarray(phi.f(x))
    if not np.all(np.isfinite(killing)) or np.abs(killing).max() > 1e8:
        raise ParameterError(
            f"test function {phi.label!r} rejected: boundary decay slower than "
            "the singular weight admits"
        )


@dataclass
class WeakResidualReport:
    """Residual of the weak identity against one test function, per time."""

    label: str
    times: np.ndarray
    residual: np.ndarray

    def max_residual(self) -> float:
        return float(np.abs(self.residual).max())


def weak_residual(traj: Trajectory, form: NonlocalForm, u_field,
                  phi: TestFunction = None, gauss_order: int = 8) -> WeakResidualReport:
    """Residual(t) of (u,phi) + int (u, L phi) - 1/2 int (u^2, phi_x) = (u0,phi).

    ``u_field`` maps a coefficient row to a nodal Field.  The operator term
    pairs u with the discrete image of the interpolated test function through
    the assembled form; the quadratic flux and the plain pairings integrate
    the piecewise-linear field against the analytic test function per cell.
    Time integrals are trapezoid sums.
    """
    if phi is None:
        phi = polynomial_bump()
    _validate_test_function(phi, form.alpha.alpha)
    mesh = form.mesh
    h = mesh.h
    gx, gw = leggauss(gauss_order)
    xl = mesh.all_nodes[:-1]
    xq = xl[:, None] + 0.5 * h * (gx[None, :] + 1.0)
    wq = 0.5 * h * gw
    phi_q = phi.f(xq)
    phix_q = phi.fx(xq)
    phi_nodes = phi.f(mesh.nodes)
    a_phi = form.A @ phi_nodes

    n_t = traj.times.size
    pair_u = np.empty(n_t)  # (u, phi)
    op_term = np.empty(n_t)  # (u, L phi) via the assembled form
    flux = np.empty(n_t)  # (u^2, phi_x)
    for m in range(n_t):
        u = u_field(traj.coeffs[m])
        v = u.padded()
        uq = v[:-1, None] + (v[1:] - v[:-1])[:, None] * (xq - xl[:, None]) / h
        pair_u[m] = np.sum((uq * phi_q) @ wq)
        flux[m] = np.sum((uq**2 * phix_q) @ wq)
        op_term[m] = u.values @ a_phi

    dt = traj.dt
    cum = lambda f: np.concatenate(([0.0], np.cumsum(0.5 * dt * (f[1:] + f[:-1]))))
    resid = pair_u + cum(op_term) - 0.5 * cum(flux) - pair_u[0]
    return WeakResidualReport(label=phi.label, times=traj.times.copy(), residual=resid)


def modal_l2t_distance(traj_coarse: Trajectory, traj_fine: Trajectory) -> float:
    """L2(0,T;H) distance of two trajectories with nested modal resolution.

    Requires the same stored time grid; the coarser coefficient rows are
    zero-padded into the finer modal space, where the H norm is Euclidean.
    """
    if traj_coarse.times.size != traj_fine.times.size or not np.allclose(
        traj_coarse.times, traj_fine.times
    ):
        raise ParameterError("trajectories must share the stored time grid")
    nc = traj_coarse.coeffs.shape[1]
    nf = traj_fine.coeffs.shape[1]
    if nc > nf:
        raise ParameterError("first trajectory must be the coarser one")
    diff = traj_fine.coeffs.copy()
    diff[:, :nc] -= traj_coarse.coeffs
    d2 = np.einsum("mk,mk->m", diff, diff)
    dt = traj_fine.dt
    return float(np.sqrt(np.sum(0.5 * dt * (d2[1:] + d2[:-1]))))


def convergence_table(trajectories) -> np.ndarray:
    """Successive L2(0,T;H) distances along an ascending resolution ladder."""
    return np.array([
        modal_l2t_distance(trajectories[i], trajectories[i + 1])
        for i in range(len(trajectories) - 1)
    ])

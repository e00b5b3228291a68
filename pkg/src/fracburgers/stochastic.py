"""Q-Wiener noise models and the drift-implicit Euler-Maruyama path sampler.

The noise basis is the operator eigenbasis itself, so covariance operators,
Hilbert-Schmidt norms, and truncations are all diagonal in modal coordinates.
Paths own counter-based RNG streams keyed by (seed, path id), and ensembles
are reduced in a fixed chunk order, making every Monte Carlo number
bit-reproducible regardless of worker-thread count.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import BlowUpError, ParameterError
from .galerkin import ConvectionTensor, EigenBasis, ModalState, nonlinear_rhs

CHUNK_SIZE = 512
DEFAULT_EPSILON = 0.1
BLOWUP_LIMIT = 1e8

NOISE_KINDS = ("additive", "linear_multiplicative")


def default_spectrum(m: int, epsilon: float = DEFAULT_EPSILON) -> np.ndarray:
    """Trace-class covariance eigenvalues lambda^Q_i = i^-(1+epsilon)."""
    if m < 1:
        raise ParameterError(f"noise dimension m must be >= 1, got {m}")
    if epsilon <= 0.0:
        raise ParameterError(f"spectrum decay epsilon must be positive, got {epsilon}")
    return np.arange(1, m + 1, dtype=float) ** (-(1.0 + epsilon))


@dataclass
class NoiseModel:
    """Finite-dimensional Q-Wiener forcing in the modal basis.

    ``additive``: g(u) dW = sigma dW; ``linear_multiplicative``:
    (g(u) dW)_i = sigma c_i dW_i.  Both satisfy the linear-growth and
    Lipschitz bounds with the explicit constants that
    :meth:`growth_constants` reports.
    """

    kind: str
    sigma: float
    m: int
    epsilon: float = DEFAULT_EPSILON
    q_spectrum: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ParameterError(
                f"noise kind must be one of {NOISE_KINDS}, got {self.kind!r}"
            )
        if self.sigma < 0.0:
            raise ParameterError(f"noise intensity sigma must be >= 0, got {self.sigma}")
        if self.q_spectrum is None:
            self.q_spectrum = default_spectrum(self.m, self.epsilon)
        else:
            self.q_spectrum = np.asarray(self.q_spectrum, dtype=float)
            if self.q_spectrum.size != self.m or np.any(self.q_spectrum <= 0.0):
                raise ParameterError(
                    "explicit covariance spectrum must hold m positive entries"
                )

    @property
    def trace(self) -> float:
        """Tr Q = sum of the covariance eigenvalues."""
        return float(self.q_spectrum.sum())

    def growth_constants(self):
        """(C, lam, L) with ||g(u)||_HS^2 <= C ||u||^2 + lam, Lip constant L."""
        if self.kind == "additive":
            return 0.0, self.sigma**2 * self.trace, 0.0
        top = self.sigma**2 * float(self.q_spectrum.max())
        return top, 0.0, float(np.sqrt(top))


@dataclass(frozen=True)
class PathRng:
    """Counter-based random stream for one sample path.

    Philox keyed by (seed, path_id): identical inputs reproduce the stream
    bit-for-bit, and distinct path ids give statistically independent streams
    without any jump-ahead bookkeeping.
    """

    seed: int
    path_id: int = 0

    def generator(self) -> np.random.Generator:
        return np.random.Generator(np.random.Philox(key=[self.seed, self.path_id]))


def wiener_increment(model: NoiseModel, dt: float,
                     gen: np.random.Generator) -> np.ndarray:
    """One modal increment Delta W_i = sqrt(lambda^Q_i dt) xi_i, xi iid N(0,1)."""
    if dt <= 0.0:
        raise ParameterError(f"dt must be positive, got {dt}")
    return np.sqrt(model.q_spectrum * dt) * gen.standard_normal(model.m)


def hs_norm_sq(model: NoiseModel, state: ModalState, n_modes: int = None) -> float:
    """Squared Hilbert-Schmidt norm of the truncated intensity at a state.

    The projection onto an n-mode system truncates the noise to the first
    min(m, n) covariance directions.  Additive intensity is state-independent;
    the multiplicative one weights each retained covariance eigenvalue by the
    squared modal coefficient it multiplies.
    """
    c = np.asarray(state.c, dtype=float)
    cut = model.m if n_modes is None else min(model.m, n_modes)
    q = model.q_spectrum[:cut]
    if model.kind == "additive":
        return float(model.sigma**2 * q.sum())
    return float(model.sigma**2 * np.sum(q * c[:cut] ** 2))


def _hs_vector_batch(model: NoiseModel, C: np.ndarray) -> np.ndarray:
    """Per-direction HS contributions for a (paths, n_modes) coefficient block."""
    cut = min(model.m, C.shape[1])
    q = model.q_spectrum[:cut]
    if model.kind == "additive":
        return np.broadcast_to(model.sigma**2 * q, (C.shape[0], cut))
    return model.sigma**2 * q * C[:, :cut] ** 2


def _noise_increment_batch(model: NoiseModel, C: np.ndarray,
                           dW: np.ndarray) -> np.ndarray:
    """g(c) Delta W for a batch, truncated to the modal dimension."""
    p, n = C.shape
    cut = min(model.m, n)
    dB = np.zeros((p, n))
    if model.kind == "additive":
        dB[:, :cut] = model.sigma * dW[:, :cut]
    else:
        dB[:, :cut] = model.sigma * C[:, :cut] * dW[:, :cut]
    return dB


def step_sde(state: ModalState, dt: float, basis: EigenBasis,
             tensor: ConvectionTensor, model: NoiseModel,
             gen: np.random.Generator, path_id: int = 0) -> ModalState:
    """One drift-implicit Euler-Maruyama step.

    c+ = (c + dt N(c) + g(c) DeltaW) / (1 + lambda dt), with the stiff linear
    part implicit and both the convection term and the noise explicit.
    """
    if dt <= 0.0:
        raise ParameterError(f"dt must be positive, got {dt}")
    c = state.c[None, :]
    dW = wiener_increment(model, dt, gen)[None, :]
    dB = _noise_increment_batch(model, c, dW)
    nl = nonlinear_rhs(tensor, c)
    new = (c + dt * nl + dB) / (1.0 + basis.lambdas * dt)
    t_new = state.t + dt
    if not np.all(np.isfinite(new)) or np.abs(new).max() > BLOWUP_LIMIT:
        raise BlowUpError(
            f"stochastic step blew up at t={t_new:.6g} on path {path_id}",
            t=t_new, norm=float(np.abs(new[np.isfinite(new)]).max(initial=np.inf)),
            path_id=path_id,
        )
    return ModalState(c=new[0], t=t_new)


def stationary_ou_variance(lam: float, q: float, sigma: float, dt: float) -> float:
    """Stationary variance of the drift-implicit scalar OU recursion.

    The exact fixed point of v = (v + sigma^2 q dt) / (1 + lam dt)^2 is the
    continuous value sigma^2 q / (2 lam) shrunk by 1 / (1 + lam dt / 2).
    """
    return sigma**2 * q / (2.0 * lam) / (1.0 + lam * dt / 2.0)


@dataclass
class SdeEnsemble:
    """Per-path checkpoint statistics of a Monte Carlo run.

    Arrays are (n_paths, n_checkpoints) in path-id order.  ``v2_int`` and
    ``hs_int`` are trapezoid accumulations over every step, ``sup_h4`` is the
    running supremum of the squared L2 norm squared again (fourth moment),
    and ``bias`` is an exact per-path upper bound on the expected
    discrete-vs-continuous energy-identity discrepancy up to the checkpoint.
    """

    times: np.ndarray
    h2: np.ndarray
    v2_int: np.ndarray
    hs_int: np.ndarray
    sup_h4: np.ndarray
    bias: np.ndarray
    seed: int
    coeffs: np.ndarray = None  # (n_paths, n_checkpoints, n_modes) if stored

    @property
    def n_paths(self) -> int:
        return self.h2.shape[0]

    def balance_residual(self) -> np.ndarray:
        """Per-path energy ledger X(t) = H2(t) - H2(0) + 2 V2int - HSint."""
        return self.h2 - self.h2[:, :1] + 2.0 * self.v2_int - self.hs_int

    def moment_rows(self):
        """(t, mean/SE of H2, V2int, sup H4, HSint) per checkpoint."""
        p = self.n_paths
        def mse(a):
            return a.mean(axis=0), a.std(axis=0, ddof=1) / np.sqrt(p)
        m_h2, s_h2 = mse(self.h2)
        m_v2, s_v2 = mse(self.v2_int)
        m_s4, s_s4 = mse(self.sup_h4)
        m_hs, s_hs = mse(self.hs_int)
        return np.column_stack(
            [self.times, m_h2, s_h2, m_v2, s_v2, m_s4, s_s4, m_hs, s_hs]
        )


def _path_normals(seed: int, path_id: int, n_steps: int, m: int) -> np.ndarray:
    return PathRng(seed, path_id).generator().standard_normal((n_steps, m))


def _simulate_chunk(basis, tensor, model, c0, dt, n_steps, store_steps,
                    path_ids, seed, store_coeffs):
    lam = basis.lambdas
    n = lam.size
    p = len(path_ids)
    denom = 1.0 + lam * dt
    sq = np.sqrt(model.q_spectrum * dt)
    cut = min(model.m, n)
    lam_cut = lam[:cut]

    xs = np.stack([_path_normals(seed, pid, n_steps, model.m) for pid in path_ids])

    C = np.tile(np.asarray(c0, dtype=float), (p, 1))
    n_store = len(store_steps)
    out = {
        "h2": np.empty((p, n_store)),
        "v2_int": np.empty((p, n_store)),
        "hs_int": np.empty((p, n_store)),
        "sup_h4": np.empty((p, n_store)),
        "bias": np.empty((p, n_store)),
    }
    coeffs = np.empty((p, n_store, n)) if store_coeffs else None

    v2 = np.sum(lam * C**2, axis=1)
    hs_vec = _hs_vector_batch(model, C)
    hs = hs_vec.sum(axis=1)
    h2 = np.sum(C**2, axis=1)
    v2_0, hs_0 = v2.copy(), hs.copy()
    v2_acc = np.zeros(p)
    hs_acc = np.zeros(p)
    bias_acc = np.zeros(p)
    sup_h4 = h2**2

    store_map = {s: j for j, s in enumerate(store_steps)}

    def record(step):
        j = store_map[step]
        out["h2"][:, j] = h2
        out["v2_int"][:, j] = v2_acc
        out["hs_int"][:, j] = hs_acc
        out["sup_h4"][:, j] = sup_h4
        out["bias"][:, j] = (
            bias_acc + dt * np.abs(v2 - v2_0) + 0.5 * dt * np.abs(hs - hs_0)
        )
        if store_coeffs:
            coeffs[:, j, :] = C

    if 0 in store_map:
        record(0)

    for step in range(n_steps):
        dW = xs[:, step, :] * sq
        dB = _noise_increment_batch(model, C, dW)
        nl = nonlinear_rhs(tensor, C)
        Cn = (C + dt * nl + dB) / denom

        if not np.all(np.isfinite(Cn)) or np.abs(Cn).max() > BLOWUP_LIMIT:
            bad = np.where(~np.all(np.isfinite(Cn), axis=1)
                           | (np.abs(Cn).max(axis=1) > BLOWUP_LIMIT))[0][0]
            t_bad = (step + 1) * dt
            raise BlowUpError(
                f"stochastic step blew up at t={t_bad:.6g} on path {path_ids[bad]}",
                t=t_bad, norm=float(np.abs(Cn[bad][np.isfinite(Cn[bad])]).max(initial=np.inf)),
                path_id=int(path_ids[bad]),
            )

        # exact per-step bound on the expected ledger discrepancy: the
        # drift cross terms are deterministic given c, the noise variance
        # deficit of the implicit division is third order in dt
        drift = (nl - lam * C) / denom
        bias_acc += dt**2 * np.abs(
            2.0 * np.einsum("pk,pk->p", nl, drift)
            - np.einsum("pk,pk->p", drift, drift)
        )
        bias_acc += dt**3 * np.sum(
            hs_vec * lam_cut**2 / (1.0 + lam_cut * dt) ** 2, axis=1
        )

        v2_new = np.sum(lam * Cn**2, axis=1)
        hs_vec = _hs_vector_batch(model, Cn)
        hs_new = hs_vec.sum(axis=1)
        v2_acc += 0.5 * dt * (v2 + v2_new)
        hs_acc += 0.5 * dt * (hs + hs_new)
        C, v2, hs = Cn, v2_new, hs_new
        h2 = np.sum(C**2, axis=1)
        np.maximum(sup_h4, h2**2, out=sup_h4)

        if (step + 1) in store_map:
            record(step + 1)

    return out, coeffs


def simulate_paths(basis: EigenBasis, tensor: ConvectionTensor, model: NoiseModel,
                   c0: np.ndarray, dt: float, t_final: float, n_paths: int,
                   seed: int, n_checkpoints: int = 10, store_coeffs: bool = False,
                   workers: int = 1) -> SdeEnsemble:
    """Monte Carlo ensemble of drift-implicit Euler-Maruyama paths.

    Paths are partitioned into fixed-size chunks and each path draws its
    normals from its own (seed, path_id)-keyed stream, so the ensemble is
    bit-identical for any worker count.  Checkpoints are n_checkpoints + 1
    equispaced times including 0 and t_final; running statistics (integrals,
    suprema, bias bound) see every step regardless of checkpoint spacing.
    """
    if dt <= 0.0:
        raise ParameterError(f"dt must be positive, got {dt}")
    if n_paths < 1:
        raise ParameterError(f"n_paths must be >= 1, got {n_paths}")
    n_steps = int(round(t_final / dt))
    if abs(n_steps * dt - t_final) > 1e-9 * max(t_final, 1.0):
        raise ParameterError(f"t_final={t_final} is not an integer multiple of dt={dt}")
    if n_steps % n_checkpoints != 0:
        raise ParameterError(
            f"step count {n_steps} not divisible by n_checkpoints={n_checkpoints}"
        )
    stride = n_steps // n_checkpoints
    store_steps = list(range(0, n_steps + 1, stride))

    chunks = [
        np.arange(start, min(start + CHUNK_SIZE, n_paths))
        for start in range(0, n_paths, CHUNK_SIZE)
    ]

    def work(ids):
        return _simulate_chunk(basis, tensor, model, c0, dt, n_steps,
                               store_steps, ids, seed, store_coeffs)

    if workers > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(ids) for ids in chunks]

    def gather(key):
        return np.concatenate([r[0][key] for r in results], axis=0)

    coeffs = (
        np.concatenate([r[1] for r in results], axis=0) if store_coeffs else None
    )
    return SdeEnsemble(
        times=dt * np.asarray(store_steps, dtype=float),
        h2=gather("h2"),
        v2_int=gather("v2_int"),
        hs_int=gather("hs_int"),
        sup_h4=gather("sup_h4"),
        bias=gather("bias"),
        seed=seed,
        coeffs=coeffs,
    )

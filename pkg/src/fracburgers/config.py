"""Flat key = value run configuration: parsing, validation, serialization.

Every number that affects a run lives here.  Unknown keys are hard errors,
all range violations cite the offending line, and the configuration hash is
stable under key reordering so manifests identify runs, not file layouts.
"""

import hashlib
from dataclasses import dataclass, fields

import numpy as np

from .errors import ConfigError
from .galerkin import EigenBasis, project
from .kernel import Field, FractionalOrder, Mesh
from .stochastic import NoiseModel

IC_CATALOG = ("sin_bump", "getoor", "random_modal", "zero")
SCHEMES = ("etd2rk", "exponential_euler")
NOISE_KINDS = ("none", "additive", "linear_multiplicative")


@dataclass
class RunConfig:
    """Validated run parameters with documented defaults."""

    alpha: float = 1.5
    n_cells: int = 128
    n_modes: int = 32
    dt: float = 1e-3
    t_final: float = 1.0
    scheme: str = "etd2rk"
    ic: str = "sin_bump"
    ic_scale: float = 1.0
    ic_modes: int = 4
    ic_seed: int = 0
    noise_kind: str = "none"
    noise_sigma: float = 0.1
    noise_epsilon: float = 0.1
    noise_m: int = 0  # 0 means: follow n_modes
    mc_paths: int = 1000
    n_checkpoints: int = 10
    gamma: float = 0.4
    delta: float = 0.0  # 0 means: 2 + alpha + 0.5
    seed: int = 12345
    workers: int = 1
    output_dir: str = "out"

    @property
    def effective_noise_m(self) -> int:
        return self.noise_m if self.noise_m > 0 else self.n_modes

    @property
    def effective_delta(self) -> float:
        return self.delta if self.delta > 0.0 else 2.0 + self.alpha + 0.5

    def noise_model(self):
        """NoiseModel for stochastic runs, None for deterministic ones."""
        if self.noise_kind == "none":
            return None
        return NoiseModel(
            kind=self.noise_kind,
            sigma=self.noise_sigma,
            m=self.effective_noise_m,
            epsilon=self.noise_epsilon,
        )


_FIELDS = {f.name: f.type for f in fields(RunConfig)}


def _convert(key: str, raw: str, line_no: int):
    kind = _FIELDS[key]
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(
            f"value {raw!r} for key {key!r} is not a {kind.__name__}",
            line_no=line_no,
        ) from None


def _validate(cfg: RunConfig, line_of=lambda key: None) -> RunConfig:
    def bad(key, msg):
        raise ConfigError(f"{key}: {msg}", line_no=line_of(key))

    if not (0.0 < cfg.alpha < 2.0):
        bad("alpha", f"must lie in (0, 2), got {cfg.alpha}")
    if cfg.n_cells < 4:
        bad("n_cells", f"must be >= 4, got {cfg.n_cells}")
    if not (1 <= cfg.n_modes <= cfg.n_cells - 1):
        bad("n_modes", f"must lie in [1, n_cells - 1], got {cfg.n_modes}")
    if cfg.dt <= 0.0:
        bad("dt", f"must be positive, got {cfg.dt}")
    if cfg.t_final <= 0.0:
        bad("t_final", f"must be positive, got {cfg.t_final}")
    if cfg.scheme not in SCHEMES:
        bad("scheme", f"must be one of {SCHEMES}, got {cfg.scheme!r}")
    if cfg.ic not in IC_CATALOG:
        bad("ic", f"must be one of {IC_CATALOG}, got {cfg.ic!r}")
    if cfg.ic_modes < 1:
        bad("ic_modes", f"must be >= 1, got {cfg.ic_modes}")
    if cfg.noise_kind not in NOISE_KINDS:
        bad("noise_kind", f"must be one of {NOISE_KINDS}, got {cfg.noise_kind!r}")
    if cfg.noise_sigma < 0.0:
        bad("noise_sigma", f"must be >= 0, got {cfg.noise_sigma}")
    if cfg.noise_epsilon <= 0.0:
        bad("noise_epsilon", f"must be positive, got {cfg.noise_epsilon}")
    if cfg.noise_m < 0:
        bad("noise_m", f"must be >= 0 (0 follows n_modes), got {cfg.noise_m}")
    if cfg.mc_paths < 1:
        bad("mc_paths", f"must be >= 1, got {cfg.mc_paths}")
    if cfg.n_checkpoints < 1:
        bad("n_checkpoints", f"must be >= 1, got {cfg.n_checkpoints}")
    if not (0.0 < cfg.gamma < 0.5):
        bad("gamma", f"must lie in (0, 1/2), got {cfg.gamma}")
    if cfg.delta < 0.0:
        bad("delta", f"must be >= 0 (0 follows 2 + alpha + 1/2), got {cfg.delta}")
    if cfg.seed < 0:
        bad("seed", f"must be >= 0, got {cfg.seed}")
    if cfg.workers < 1:
        bad("workers", f"must be >= 1, got {cfg.workers}")
    return cfg


def parse_config(text: str) -> RunConfig:
    """Parse flat key = value lines with # comments into a validated config."""
    values = {}
    lines = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"malformed line {raw.strip()!r}, expected key = value",
                              line_no=line_no)
        key, _, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}", line_no=line_no)
        if key in values:
            raise ConfigError(f"duplicate key {key!r}", line_no=line_no)
        values[key] = _convert(key, val, line_no)
        lines[key] = line_no
    cfg = RunConfig(**values)
    return _validate(cfg, line_of=lines.get)


def load_config(path) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def apply_overrides(cfg: RunConfig, pairs) -> RunConfig:
    """New config with `key=value` override strings applied and revalidated."""
    values = {f.name: getattr(cfg, f.name) for f in fields(RunConfig)}
    for i, pair in enumerate(pairs, start=1):
        if "=" not in pair:
            raise ConfigError(f"malformed override {pair!r}, expected key=value")
        key, _, val = pair.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _FIELDS:
            raise ConfigError(f"unknown key {key!r}")
        values[key] = _convert(key, val, i)
    return _validate(RunConfig(**values))


def serialize_config(cfg: RunConfig) -> str:
    """Canonical key = value text that reparses to an equal config."""
    out = []
    for f in fields(RunConfig):
        v = getattr(cfg, f.name)
        if isinstance(v, float):
            v = repr(v)
        out.append(f"{f.name} = {v}")
    return "\n".join(out) + "\n"


def config_hash(cfg: RunConfig) -> str:
    """SHA-256 of the sorted canonical lines; invariant to key order."""
    canon = "\n".join(sorted(serialize_config(cfg).splitlines()))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def initial_field(cfg: RunConfig, mesh: Mesh) -> Field:
    """Catalog initial conditions interpolated onto the mesh nodes."""
    x = mesh.nodes
    if cfg.ic == "sin_bump":
        vals = np.sin(np.pi * (x + 1.0) / 2.0) * (1.0 - x**2)
    elif cfg.ic == "getoor":
        FractionalOrder(cfg.alpha)  # range check mirrors the operator's
        vals = (1.0 - x**2) ** (cfg.alpha / 2.0)
    elif cfg.ic == "zero":
        vals = np.zeros_like(x)
    else:  # random_modal: smooth low-frequency combination, seed-reproducible
        rng = np.random.default_rng(cfg.ic_seed)
        coef = rng.standard_normal(cfg.ic_modes) / np.arange(1, cfg.ic_modes + 1)
        vals = sum(
            c * np.sin((k + 1) * np.pi * (x + 1.0) / 2.0) for k, c in enumerate(coef)
        ) * (1.0 - x**2)
    return Field(mesh, cfg.ic_scale * vals)


def initial_state(cfg: RunConfig, basis: EigenBasis) -> np.ndarray:
    """Modal coefficients of the configured initial condition."""
    return project(basis, initial_field(cfg, basis.mesh)).c

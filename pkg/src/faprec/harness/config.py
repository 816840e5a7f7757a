"""Experiment configuration: defaults, flat ``key = value`` files, CLI overrides."""

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from faprec.channel import ChannelStatistics, exp_correlation, load_complex_matrix
from faprec.constellation import DEFAULT_MAX_VECTORS, difference_set, enumerate_vectors, parse_modulation
from faprec.errors import ConfigError
from faprec.optim import SolverOptions

STRATEGIES = ("none", "beamforming", "gaussian", "proposed")


def sigma2_from_snr_db(snr_db):
    """Unit-covariance inputs make SNR = 1 / sigma2."""
    return 10.0 ** (-float(snr_db) / 10.0)


def snr_db_from_sigma2(sigma2):
    return -10.0 * np.log10(sigma2)


def parse_snr_grid(text):
    """``"a:b:step"`` (inclusive) or a comma-separated list of dB values."""
    text = str(text).strip()
    try:
        if ":" in text:
            a, b, step = (float(x) for x in text.split(":"))
            if step <= 0 or b < a:
                raise ConfigError(f"bad SNR grid {text!r}")
            n = int(np.floor((b - a) / step + 1e-9)) + 1
            return [round(a + i * step, 10) for i in range(n)]
        grid = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"bad SNR grid {text!r}") from None
    if not grid:
        raise ConfigError("SNR grid is empty")
    return grid


@dataclass
class ExperimentConfig:
    nt: int = 2
    nr: int = 2
    modulation: str = "qpsk"
    rho_t: float = 0.8
    rho_r: float = 0.5
    psi_t_path: str = None
    psi_r_path: str = None
    snr_grid_db: list = None
    study_snr_db: float = -5.0
    n_channel: int = 2000
    n_noise: int = 50
    n_inits: int = 200
    n_restarts: int = 8
    n_batch: int = 2000
    target_mi: float = 2.0
    master_seed: int = 0
    strategies: list = field(default_factory=lambda: list(STRATEGIES))
    max_vectors: int = DEFAULT_MAX_VECTORS
    max_outer_iters: int = 50
    max_inner_iters: int = 500
    tol_bound: float = 1e-6
    # run-time only: excluded from the config hash and CSV header
    out: str = None
    svg: str = None
    threads: int = 1

    RUNTIME_KEYS = ("out", "svg", "threads")

    def validate(self):
        if self.nt < 1 or self.nr < 1:
            raise ConfigError("antenna counts must be >= 1")
        for name in ("n_channel", "n_noise", "n_inits", "n_restarts", "n_batch", "threads"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ConfigError(f"unknown strategy {s!r}; choose from {', '.join(STRATEGIES)}")
        if self.snr_grid_db is not None and not self.snr_grid_db:
            raise ConfigError("SNR grid is empty")
        if self.psi_t_path is None:
            exp_correlation(self.nt, self.rho_t)
        if self.psi_r_path is None:
            exp_correlation(self.nr, self.rho_r)
        self.solver_options()
        return self

    def solver_options(self):
        return SolverOptions(max_outer_iters=self.max_outer_iters,
                             max_inner_iters=self.max_inner_iters,
                             tol_bound=self.tol_bound)

    def statistics(self):
        psi_t = load_complex_matrix(self.psi_t_path) if self.psi_t_path else exp_correlation(self.nt, self.rho_t)
        psi_r = load_complex_matrix(self.psi_r_path) if self.psi_r_path else exp_correlation(self.nr, self.rho_r)
        if psi_t.shape != (self.nt, self.nt) or psi_r.shape != (self.nr, self.nr):
            raise ConfigError("correlation matrix size does not match nt/nr")
        return ChannelStatistics.from_correlations(psi_t, psi_r)

    def difference_set(self):
        c = parse_modulation(self.modulation)
        return difference_set(enumerate_vectors(c, self.nt, self.max_vectors))

    def grid(self, default):
        return list(self.snr_grid_db) if self.snr_grid_db is not None else parse_snr_grid(default)

    def canonical(self):
        d = dataclasses.asdict(self)
        for k in self.RUNTIME_KEYS:
            d.pop(k, None)
        return d

    def config_hash(self):
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
_ALIASES = {"seed": "master_seed", "snr_grid": "snr_grid_db", "strategy": "strategies",
            "study_snr": "study_snr_db"}


def _coerce(name, raw):
    if name == "snr_grid_db":
        return parse_snr_grid(raw)
    if name == "strategies":
        return [s.strip() for s in str(raw).split(",") if s.strip()]
    if name in ("psi_t_path", "psi_r_path", "out", "svg", "modulation"):
        return str(raw)
    default = _FIELDS[name].default
    try:
        if isinstance(default, bool):
            return str(raw).lower() in ("1", "true", "yes")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except ValueError:
        raise ConfigError(f"bad value {raw!r} for {name}") from None
    return raw


def normalize_key(key):
    key = key.strip().replace("-", "_")
    key = _ALIASES.get(key, key)
    if key not in _FIELDS or key == "RUNTIME_KEYS":
        raise ConfigError(f"unknown config key {key!r}")
    return key


def read_config_file(path):
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            k, v = line.split("=", 1)
            k = normalize_key(k)
            values[k] = _coerce(k, v.strip())
    return values


def build_config(file_path=None, overrides=None):
    """Defaults, then file values, then explicit overrides (``None`` means unset)."""
    values = {}
    if file_path:
        values.update(read_config_file(file_path))
    for k, v in (overrides or {}).items():
        if v is not None:
            k = normalize_key(k)
            values[k] = _coerce(k, v) if isinstance(v, str) else v
    return ExperimentConfig(**values).validate()

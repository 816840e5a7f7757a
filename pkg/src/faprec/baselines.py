"""Reference strategies: no precoding, beamforming, Gaussian-input capacity."""

from dataclasses import dataclass, field

import numpy as np

from faprec.channel import sample_channel
from faprec.errors import PreconditionError
from faprec.infotheory import LN2, MIEstimate
from faprec.optim import Precoder, SolverOptions, project_simplex
from faprec.streams import CHANNEL, GAUSSIAN_BATCH, substream


def no_precoding(nt):
    eye = np.eye(nt, dtype=complex)
    return Precoder(eye, np.ones(nt), eye)


def beamforming(stats):
    """All power on the strongest transmit eigenmode (the first one on ties)."""
    nt = stats.nt
    lam = np.zeros(nt)
    lam[int(np.argmax(stats.sigma_t))] = nt
    return Precoder(stats.u_t, lam, np.eye(nt, dtype=complex))


@dataclass(frozen=True)
class GaussianInputCovariance:
    """``Q = U_t diag(p) U_t^H``."""

    q: np.ndarray = field(repr=False)
    p: np.ndarray
    value_bits: float = float("nan")
    converged: bool = True

    def as_precoder(self, stats):
        """The matching finite-alphabet precoder ``U_t diag(sqrt(p))``."""
        return Precoder(stats.u_t, self.p, np.eye(self.p.size, dtype=complex))


def _check_covariance(q, nt):
    q = np.asarray(q)
    if q.shape != (nt, nt) or np.max(np.abs(q - q.conj().T)) > 1e-10:
        raise PreconditionError("input covariance must be an Nt x Nt Hermitian matrix")
    if np.linalg.eigvalsh(q)[0] < -1e-10:
        raise PreconditionError("input covariance is not positive semidefinite")
    if abs(np.real(np.trace(q)) - nt) > 1e-6:
        raise PreconditionError(f"input covariance must have trace {nt}")
    return q


def _log2det(hs, q, sigma2):
    nr = hs.shape[1]
    m = np.eye(nr) + hs @ q @ hs.conj().swapaxes(-1, -2) / sigma2
    sign, logdet = np.linalg.slogdet(m)
    return logdet / LN2


def ergodic_gaussian_capacity(stats, q, sigma2, n_channel=2000, seed=0):
    """``E log2 det(I + H Q H^H / sigma2)`` over the channel substreams of ``seed``.

    Channel ``i`` is the same draw :func:`faprec.infotheory.average_mi` uses,
    so comparisons against finite-alphabet curves share random numbers.
    """
    q = _check_covariance(q, stats.nt)
    hs = np.array([sample_channel(stats, substream(seed, CHANNEL, i)) for i in range(n_channel)])
    vals = _log2det(hs, q, sigma2)
    se = float(vals.std(ddof=1) / np.sqrt(n_channel)) if n_channel > 1 else 0.0
    return MIEstimate(float(vals.mean()), se, n_channel, 0)


def channel_batch(stats, n, seed):
    """Fixed batch of eigen-domain channels ``H U_t`` for common random numbers."""
    return np.array([sample_channel(stats, substream(seed, GAUSSIAN_BATCH, i)) @ stats.u_t
                     for i in range(n)])


def _capacity_and_grad(hs, p, sigma2):
    nr = hs.shape[1]
    m = np.eye(nr) + (hs * p) @ hs.conj().swapaxes(-1, -2) / sigma2
    _, logdet = np.linalg.slogdet(m)
    x = np.linalg.solve(m, hs)  # M^{-1} h_i, column by column
    grad = np.real(np.einsum("cri,cri->ci", hs.conj(), x)).mean(axis=0) / (sigma2 * LN2)
    return float(logdet.mean() / LN2), grad


def gaussian_capacity_precoder(stats, sigma2, n_batch=2000, seed=0, opts=SolverOptions()):
    """Eigen-powers along ``U_t`` maximizing the batch-averaged Gaussian capacity.

    The batch is fixed up front, so projected gradient ascent sees a
    deterministic concave objective.
    """
    nt = stats.nt
    hs = channel_batch(stats, n_batch, seed)
    p = np.full(nt, 1.0)
    f, g = _capacity_and_grad(hs, p, sigma2)
    step = opts.initial_step
    converged = False
    for it in range(1, opts.max_inner_iters + 1):
        if np.linalg.norm(project_simplex(p + g, nt) - p) <= opts.tol_power:
            converged = True
            break
        t = min(2.0 * step, opts.max_step) if it > 1 else step
        for _ in range(opts.max_backtracks):
            cand = project_simplex(p + t * g, nt)
            fc, gc = _capacity_and_grad(hs, cand, sigma2)
            if fc >= f + opts.armijo_c * (g @ (cand - p)):
                break
            t *= opts.backtrack
        else:
            converged = True
            break
        p, f, g, step = cand, fc, gc, t
    q = (stats.u_t * p) @ stats.u_t.conj().T
    return GaussianInputCovariance(q, p, f, converged)

"""Average mutual information, its closed-form lower bound, and gradients.

Conventions
-----------
* Public values are in bits; sums are accumulated in nats and converted once.
* A precoder enters the bound only through the Hermitian "gram" matrix
  ``W = P^H Psi_t P``.  With ``P = U_t diag(sqrt(lam)) V^H`` this is
  ``V diag(lam * t) V^H``, which is linear in ``lam``.
* For every pair the per-pair exponent is
  ``s_mk = -sum_q log1p(r_q / (2 sigma2) * e_mk^H W e_mk)`` and the inner
  sums over ``k`` go through a max-shifted log-sum-exp.
* The unitary gradient ``G`` is the derivative with respect to the conjugate
  entries of ``V``, so that ``f(V + d) ~ f(V) + 2 Re tr(G^H d)``.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from faprec.channel import sample_channel, sample_reduced_channel
from faprec.errors import ConfigError, PreconditionError
from faprec.streams import CHANNEL, complex_normal, substream

LN2 = np.log(2.0)
SIMPLEX_TOL = 1e-9
UNITARY_TOL = 1e-8


def jensen_gap(nr):
    """``Nr * (1/ln 2 - 1)``: the constant separating the bound from the MI at the SNR extremes."""
    return nr * (1.0 / LN2 - 1.0)


@dataclass(frozen=True)
class MIEstimate:
    """Monte Carlo estimate; ``std_error`` is taken across channel draws only."""

    mean_bits: float
    std_error: float
    n_channel: int
    n_noise: int

    def joint_std_error(self, other):
        return float(np.hypot(self.std_error, other.std_error))


@dataclass(frozen=True)
class BoundContext:
    """Everything the lower bound needs besides the precoder itself."""

    diffs: object
    sigma_t: np.ndarray
    sigma_r: np.ndarray
    sigma2: float
    u_t: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ConfigError(f"noise variance must be positive, got {self.sigma2}")
        if self.sigma_t.size != self.diffs.nt:
            raise PreconditionError(
                f"{self.sigma_t.size} transmit eigenvalues for Nt = {self.diffs.nt}")

    @classmethod
    def from_statistics(cls, stats, diffs, sigma2):
        return cls(diffs, np.asarray(stats.sigma_t), np.asarray(stats.sigma_r), float(sigma2), stats.u_t)

    @property
    def nt(self):
        return self.sigma_t.size

    @property
    def nr(self):
        return self.sigma_r.size

    @property
    def coeffs(self):
        """``r_q / (2 sigma2)``."""
        return self.sigma_r / (2.0 * self.sigma2)

    def with_sigma2(self, sigma2):
        return BoundContext(self.diffs, self.sigma_t, self.sigma_r, float(sigma2), self.u_t)


def _check_lambda(lam, nt):
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (nt,):
        raise PreconditionError(f"power vector must have length {nt}, got shape {lam.shape}")
    if np.any(lam < -SIMPLEX_TOL) or abs(lam.sum() - nt) > SIMPLEX_TOL:
        raise PreconditionError(f"power vector {lam} is not on the simplex of total {nt}")
    return lam


def _check_unitary(v, nt):
    v = np.asarray(v)
    if v.shape != (nt, nt):
        raise PreconditionError(f"V must be {nt}x{nt}, got shape {v.shape}")
    if np.max(np.abs(v.conj().T @ v - np.eye(nt))) > UNITARY_TOL:
        raise PreconditionError("V is not unitary")
    return v


def _terms(ctx, gamma):
    """Bound value and the per-pair softmax weights ``p`` and slopes ``beta``.

    ``beta_mk = -d s_mk / d gamma_mk``.
    """
    c = ctx.coeffs
    cg = gamma[..., None] * c
    s = -np.log1p(cg).sum(axis=-1)
    lse = logsumexp(s, axis=1, keepdims=True)
    p = np.exp(s - lse)
    beta = (c / (1.0 + cg)).sum(axis=-1)
    value = ctx.diffs.log2_size - jensen_gap(ctx.nr) - float(lse.mean()) / LN2
    return value, p, beta


def _value(ctx, gamma):
    s = -np.log1p(gamma[..., None] * ctx.coeffs).sum(axis=-1)
    return ctx.diffs.log2_size - jensen_gap(ctx.nr) - float(logsumexp(s, axis=1).mean()) / LN2


def lambda_weights(ctx, v_p):
    """``A[m, k, i] = t_i |(V^H e_mk)_i|^2`` so that ``gamma = A @ lam``."""
    w = ctx.diffs.project(v_p)
    return (w.real**2 + w.imag**2) * ctx.sigma_t


def bound_from_weights(ctx, weights, lam):
    """Bound and its gradient in ``lam`` for precomputed :func:`lambda_weights`."""
    value, p, beta = _terms(ctx, weights @ lam)
    grad = np.einsum("mk,mki->i", p * beta, weights) / (ctx.diffs.n_vectors * LN2)
    return value, grad


def lower_bound_gram(ctx, gram):
    """Bound for an arbitrary Hermitian ``W = P^H Psi_t P``."""
    return _value(ctx, ctx.diffs.quadratic_form(gram))


def lower_bound(ctx, lam, v_p, check=True):
    """Closed-form lower bound (bits) for ``P = U_t diag(sqrt(lam)) V^H``.

    With ``check=False`` the preconditions are skipped, which lets finite
    differences step off the constraint set.
    """
    if check:
        lam = _check_lambda(lam, ctx.nt)
        v_p = _check_unitary(v_p, ctx.nt)
    return _value(ctx, lambda_weights(ctx, v_p) @ np.asarray(lam, dtype=float))


def lower_bound_shifted(ctx, lam, v_p, check=True):
    """Lower bound plus ``Nr (1/ln 2 - 1)``; tends to the MI at both SNR extremes."""
    return lower_bound(ctx, lam, v_p, check) + jensen_gap(ctx.nr)


def lower_bound_precoder(ctx, p):
    """Bound of an arbitrary precoder matrix (needs ``ctx.u_t``)."""
    if ctx.u_t is None:
        raise PreconditionError("context was built without transmit eigenvectors")
    psi_t = (ctx.u_t * ctx.sigma_t) @ ctx.u_t.conj().T
    return lower_bound_gram(ctx, p.conj().T @ psi_t @ p)


def grad_lambda(ctx, lam, v_p):
    """``d I_L / d lam_i`` (bits per unit power)."""
    return bound_from_weights(ctx, lambda_weights(ctx, v_p), np.asarray(lam, dtype=float))[1]


def grad_unitary(ctx, lam, v_p):
    """Conjugate (Wirtinger) gradient of the bound with respect to ``V``.

    ``G = (1 / (N ln 2)) * (sum_mk p_mk beta_mk e_mk e_mk^H) V D`` with
    ``D = diag(lam * t)``.
    """
    lam = np.asarray(lam, dtype=float)
    d = lam * ctx.sigma_t
    _, p, beta = _terms(ctx, lambda_weights(ctx, v_p) @ lam)
    e = ctx.diffs.e
    w = (p * beta)[..., None] * e
    s = np.einsum("mki,mkj->ij", w, e.conj()) / (ctx.diffs.n_vectors * LN2)
    return (s @ v_p) * d


def min_distance(p_tilde, sigma_t, diffs):
    """``min_{m != k} || Sigma_t^{1/2} P~ (x_m - x_k) ||^2`` by exhaustive search."""
    a = np.sqrt(np.asarray(sigma_t))[:, None] * np.asarray(p_tilde)
    y = diffs.e @ a.T
    d = (y.real**2 + y.imag**2).sum(axis=-1)
    return float(d[diffs.off_diagonal_mask()].min())


# -- Monte Carlo ---------------------------------------------------------


def _batch_mi(hp, diffs, sigma2, noise):
    """Instantaneous MI (bits) for a stack of effective channels ``hp = H P``.

    ``hp`` has shape ``(C, Nr, Nt)``, ``noise`` shape ``(C, N, n_noise, Nr)``:
    independent noise draws for each transmitted vector ``m``.
    """
    y = diffs.e @ hp[:, None].swapaxes(-1, -2)  # (C, N, N, Nr): H P e_mk
    a = (y.real**2 + y.imag**2).sum(axis=-1)
    cross = np.matmul(y.conj(), noise.swapaxes(-1, -2)).real  # (C, N, N, n_noise)
    d = (a[..., None] + 2.0 * cross) / sigma2
    lse = logsumexp(-d, axis=2)  # (C, N, n_noise)
    c = lse.shape[0]
    return diffs.log2_size - lse.reshape(c, -1).mean(axis=1) / LN2


def instantaneous_mi_given_noise(h, p, diffs, sigma2, noise):
    """Instantaneous MI for fixed noise samples.

    ``noise`` is ``(N, n_noise, Nr)``, or ``(n_noise, Nr)`` to reuse the same
    draws for every transmitted vector.
    """
    if not sigma2 > 0:
        raise ConfigError(f"noise variance must be positive, got {sigma2}")
    noise = np.asarray(noise)
    if noise.ndim == 2:
        noise = np.broadcast_to(noise, (diffs.n_vectors,) + noise.shape)
    hp = np.asarray(h) @ np.asarray(p)
    return float(_batch_mi(hp[None], diffs, sigma2, noise[None])[0])


def instantaneous_mi(h, p, diffs, sigma2, noise_draws, rng):
    """Monte Carlo instantaneous MI (bits) of ``y = H P x + n`` for one channel."""
    if noise_draws < 1:
        raise ConfigError("need at least one noise draw")
    if not sigma2 > 0:
        raise ConfigError(f"noise variance must be positive, got {sigma2}")
    nr = np.asarray(h).shape[0]
    noise = complex_normal(rng, (diffs.n_vectors, noise_draws, nr), sigma2)
    return instantaneous_mi_given_noise(h, p, diffs, sigma2, noise)


def _chunk_size(diffs, n_noise, budget=4_000_000):
    n = diffs.n_vectors
    return max(1, budget // (n * n * max(n_noise, 1)))


def mi_samples(stats, diffs, p, sigma2, n_channel, n_noise, seed, reduced=False, workers=1):
    """Per-channel instantaneous MI values (bits), in channel-index order.

    Channel ``i`` (and its noise) come from substream ``(seed, CHANNEL, i)``,
    so any two calls with the same seed see the same channels.
    """
    if n_channel < 1 or n_noise < 1:
        raise ConfigError("n_channel and n_noise must be >= 1")
    if not sigma2 > 0:
        raise ConfigError(f"noise variance must be positive, got {sigma2}")
    p = np.asarray(p)
    if reduced:
        p = stats.u_t.conj().T @ p
        draw = sample_reduced_channel
    else:
        draw = sample_channel
    n = diffs.n_vectors

    def run(lo, hi):
        hs = np.empty((hi - lo, stats.nr, stats.nt), dtype=complex)
        noise = np.empty((hi - lo, n, n_noise, stats.nr), dtype=complex)
        for j, i in enumerate(range(lo, hi)):
            rng = substream(seed, CHANNEL, i)
            hs[j] = draw(stats, rng)
            noise[j] = complex_normal(rng, (n, n_noise, stats.nr), sigma2)
        return _batch_mi(hs @ p, diffs, sigma2, noise)

    step = _chunk_size(diffs, n_noise)
    bounds = [(lo, min(lo + step, n_channel)) for lo in range(0, n_channel, step)]
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda b: run(*b), bounds))
    else:
        parts = [run(*b) for b in bounds]
    return np.concatenate(parts)


def summarize(samples, n_noise):
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    se = float(samples.std(ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return MIEstimate(float(samples.mean()), se, n, n_noise)


def average_mi(stats, diffs, p, sigma2, n_channel=2000, n_noise=50, seed=0, reduced=False, workers=1):
    """Monte Carlo average mutual information (bits) of precoder ``p``.

    With ``reduced=True`` the estimate runs through the eigen-domain channel
    ``Sigma_r^{1/2} H_w Sigma_t^{1/2}`` and the reduced precoder ``U_t^H P``.
    """
    s = mi_samples(stats, diffs, p, sigma2, n_channel, n_noise, seed, reduced, workers)
    return summarize(s, n_noise)

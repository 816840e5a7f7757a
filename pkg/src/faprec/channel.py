"""Kronecker-correlated Rayleigh channels.

``H = Psi_r^{1/2} H_w Psi_t^{1/2}`` with i.i.d. CN(0, 1) entries in ``H_w``.
Square roots are taken through the eigendecompositions, so the same
transmit eigenvectors ``U_t`` serve both sampling and precoder design.
"""

from dataclasses import dataclass, field

import numpy as np

from faprec.errors import ConfigError, PreconditionError
from faprec.streams import complex_normal

HERMITIAN_TOL = 1e-12


def exp_correlation(n, rho):
    """Exponential correlation matrix ``[Psi]_{ij} = rho**|i-j|``."""
    if not (0.0 <= rho < 1.0):
        raise ConfigError(f"correlation coefficient must lie in [0, 1), got {rho}")
    if n < 1:
        raise ConfigError(f"dimension must be >= 1, got {n}")
    i = np.arange(n)
    return rho ** np.abs(i[:, None] - i[None, :]).astype(float)


def check_correlation(psi):
    psi = np.asarray(psi)
    if psi.ndim != 2 or psi.shape[0] != psi.shape[1]:
        raise PreconditionError(f"correlation matrix must be square, got shape {psi.shape}")
    if np.max(np.abs(psi - psi.conj().T)) > HERMITIAN_TOL:
        raise PreconditionError("correlation matrix is not Hermitian")
    return psi


def eigendecompose(psi):
    """Eigendecomposition with eigenvalues in descending order.

    Ties keep the order returned by ``eigh`` reversed stably, so repeated
    eigenvalues give deterministic eigenvectors.

    Returns
    -------
    u : ndarray
        Unitary matrix whose columns are eigenvectors.
    w : ndarray
        Real eigenvalues, descending, all positive.
    """
    psi = check_correlation(psi)
    w, u = np.linalg.eigh(psi)
    order = np.argsort(-w, kind="stable")
    w, u = w[order], u[:, order]
    if w[-1] <= 0:
        raise PreconditionError(f"correlation matrix is not positive definite (min eigenvalue {w[-1]:.3g})")
    return u, w


@dataclass(frozen=True)
class ChannelStatistics:
    """Transmit/receive correlations and their eigendecompositions."""

    psi_t: np.ndarray = field(repr=False)
    psi_r: np.ndarray = field(repr=False)
    u_t: np.ndarray = field(repr=False)
    sigma_t: np.ndarray
    u_r: np.ndarray = field(repr=False)
    sigma_r: np.ndarray
    sqrt_t: np.ndarray = field(repr=False)
    sqrt_r: np.ndarray = field(repr=False)

    @classmethod
    def from_correlations(cls, psi_t, psi_r):
        u_t, s_t = eigendecompose(psi_t)
        u_r, s_r = eigendecompose(psi_r)
        sqrt_t = (u_t * np.sqrt(s_t)) @ u_t.conj().T
        sqrt_r = (u_r * np.sqrt(s_r)) @ u_r.conj().T
        return cls(np.asarray(psi_t), np.asarray(psi_r), u_t, s_t, u_r, s_r, sqrt_t, sqrt_r)

    @classmethod
    def exponential(cls, nt, nr, rho_t, rho_r):
        return cls.from_correlations(exp_correlation(nt, rho_t), exp_correlation(nr, rho_r))

    @property
    def nt(self):
        return self.sigma_t.size

    @property
    def nr(self):
        return self.sigma_r.size


def sample_channel(stats, rng):
    """One draw of ``Psi_r^{1/2} H_w Psi_t^{1/2}``."""
    hw = complex_normal(rng, (stats.nr, stats.nt))
    return stats.sqrt_r @ hw @ stats.sqrt_t


def sample_reduced_channel(stats, rng):
    """One draw of ``Sigma_r^{1/2} H_w Sigma_t^{1/2}`` (eigen-domain channel).

    Use it with the reduced precoder ``U_t^H P``; the rotated white matrix
    ``U_r^H H_w U_t`` has the same law as ``H_w``.
    """
    hw = complex_normal(rng, (stats.nr, stats.nt))
    return np.sqrt(stats.sigma_r)[:, None] * hw * np.sqrt(stats.sigma_t)[None, :]


def load_complex_matrix(path):
    """Read a whitespace-separated complex matrix, one row per line.

    Tokens look like ``1``, ``0.5-0.2i`` or ``0.3+1j``; blank lines and lines
    starting with ``#`` are skipped.
    """
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                rows.append([complex(tok.replace("i", "j")) for tok in line.split()])
            except ValueError as exc:
                raise ConfigError(f"{path}: bad matrix entry ({exc})") from None
    if not rows or any(len(r) != len(rows) for r in rows):
        raise ConfigError(f"{path}: matrix must be square and non-empty")
    a = np.array(rows)
    if np.all(a.imag == 0):
        a = a.real
    return a

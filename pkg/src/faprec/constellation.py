"""Finite-alphabet constellations and the symbol-vector / difference sets.

Every mutual-information expression in this package is a double sum over
pairs of transmitted symbol vectors.  :func:`difference_set` builds the
``M**Nt x M**Nt`` table of differences ``x_m - x_k`` once, so that the
bound, its gradients and the Monte Carlo estimator can share it.
"""

import enum
import math
import re
from dataclasses import dataclass, field

import numpy as np

from faprec.errors import ConfigError, SizeError

DEFAULT_MAX_VECTORS = 4096


class Scheme(enum.Enum):
    BPSK = "bpsk"
    PSK = "psk"
    QAM = "qam"


@dataclass(frozen=True)
class Constellation:
    """Equiprobable point set with zero mean and unit average energy."""

    scheme: Scheme
    order: int
    points: np.ndarray = field(repr=False)

    @property
    def bits_per_symbol(self):
        return int(np.log2(self.order))


def _is_power_of_two(n):
    return n >= 1 and (n & (n - 1)) == 0


def _gray(n):
    return n ^ (n >> 1)


def make_constellation(scheme, order=None):
    """Build a constellation.

    Parameters
    ----------
    scheme : str or Scheme
        ``"bpsk"``, ``"psk"``/``"qpsk"`` or ``"qam"``.
    order : int, optional
        Number of points.  Defaults to 2 for BPSK and 4 for (Q)PSK.

    Returns
    -------
    Constellation
        PSK points are placed so that point ``b`` sits at the angular slot
        whose Gray code is ``b``; QAM points are listed row-major, top row
        first, left to right.
    """
    if isinstance(scheme, str):
        name = scheme.lower()
        if name == "qpsk":
            name, order = "psk", 4 if order is None else order
        try:
            scheme = Scheme(name)
        except ValueError:
            raise ConfigError(f"unknown modulation scheme {scheme!r}") from None
    if order is None:
        order = {Scheme.BPSK: 2, Scheme.PSK: 4}.get(scheme)
        if order is None:
            raise ConfigError("QAM needs an explicit order")
    order = int(order)

    if scheme is Scheme.BPSK:
        if order != 2:
            raise ConfigError(f"BPSK has order 2, got {order}")
        pts = np.array([1.0 + 0j, -1.0 + 0j])
    elif scheme is Scheme.PSK:
        if order < 2 or not _is_power_of_two(order):
            raise ConfigError(f"PSK order must be a power of two >= 2, got {order}")
        offset = np.pi / order if order >= 4 else 0.0
        slot = np.empty(order, dtype=int)
        for k in range(order):
            slot[_gray(k)] = k
        pts = np.exp(1j * (2 * np.pi * slot / order + offset))
    else:
        side = int(round(np.sqrt(order)))
        if side * side != order or not _is_power_of_two(order) or order < 4:
            raise ConfigError(f"QAM order must be a square power of two, got {order}")
        levels = np.arange(-(side - 1), side, 2, dtype=float)
        pts = np.array([re_ + 1j * im for im in levels[::-1] for re_ in levels])
        pts = pts / np.sqrt(2.0 * (order - 1) / 3.0)
    return Constellation(scheme, order, pts)


_MOD_RE = re.compile(r"^(\d*)\s*(bpsk|qpsk|psk|qam)$")


def parse_modulation(text):
    """Parse CLI strings such as ``qpsk``, ``bpsk``, ``8psk`` or ``16qam``."""
    m = _MOD_RE.match(text.strip().lower())
    if m is None:
        raise ConfigError(f"cannot parse modulation {text!r}")
    order = int(m.group(1)) if m.group(1) else None
    name = m.group(2)
    if name == "qpsk" and order not in (None, 4):
        raise ConfigError(f"QPSK has order 4, got {order}")
    return make_constellation(name, order)


@dataclass(frozen=True)
class SymbolVectorSet:
    """All ``M**Nt`` transmit vectors, one per row."""

    constellation: Constellation
    nt: int
    vectors: np.ndarray = field(repr=False)

    def __len__(self):
        return self.vectors.shape[0]


def enumerate_vectors(constellation, nt, max_vectors=DEFAULT_MAX_VECTORS):
    """Enumerate every length-``nt`` vector over the constellation.

    Row ``n`` has digits ``n = sum_j d_j M**(nt-1-j)``: the last antenna
    varies fastest (the order of :func:`itertools.product`).
    """
    if nt < 1:
        raise ConfigError(f"Nt must be >= 1, got {nt}")
    M = constellation.order
    count = M**nt
    if count > max_vectors:
        raise SizeError(f"M**Nt = {count} exceeds the cap of {max_vectors} symbol vectors")
    idx = np.arange(count)
    digits = np.empty((count, nt), dtype=int)
    for j in range(nt - 1, -1, -1):
        digits[:, j] = idx % M
        idx = idx // M
    return SymbolVectorSet(constellation, nt, constellation.points[digits])


@dataclass(frozen=True)
class DifferenceSet:
    """Pairwise differences ``e[m, k] = x_m - x_k`` (diagonal included)."""

    symbols: SymbolVectorSet
    e: np.ndarray = field(repr=False)

    @property
    def n_vectors(self):
        return self.e.shape[0]

    @property
    def nt(self):
        return self.e.shape[2]

    @property
    def log2_size(self):
        """``Nt * log2(M)``, the saturation value of the mutual information."""
        return float(np.log2(self.n_vectors))

    def pairs(self):
        """Iterate over ``(m, k, e_mk)`` for all ordered pairs."""
        n = self.n_vectors
        for m in range(n):
            for k in range(n):
                yield m, k, self.e[m, k]

    def scatter(self):
        """``sum_{m,k} e_mk e_mk^H``."""
        flat = self.e.reshape(-1, self.nt)
        prods = flat[:, :, None] * flat.conj()[:, None, :]
        # exactly rounded sums: float accumulation drifts ~1e-10 over the
        # M**(2Nt) = 65536 terms of 16-QAM with two antennas
        out = np.empty((self.nt, self.nt), dtype=complex)
        for i in range(self.nt):
            for j in range(self.nt):
                out[i, j] = complex(math.fsum(prods[:, i, j].real), math.fsum(prods[:, i, j].imag))
        return out

    def scalar(self):
        """The constant ``c`` with ``scatter() == c * I`` for symmetric alphabets."""
        return float(np.real(np.trace(self.scatter()))) / self.nt

    def quadratic_form(self, a):
        """``e_mk^H A e_mk`` for every pair, as a real ``(N, N)`` array."""
        return np.real(np.einsum("mki,ij,mkj->mk", self.e.conj(), a, self.e))

    def project(self, v):
        """``V^H e_mk`` for every pair, shape ``(N, N, Nt)``."""
        return self.e @ v.conj()

    def off_diagonal_mask(self):
        return ~np.eye(self.n_vectors, dtype=bool)


def difference_set(symbols):
    x = symbols.vectors
    return DifferenceSet(symbols, x[:, None, :] - x[None, :, :])

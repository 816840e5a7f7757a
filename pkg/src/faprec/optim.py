"""Two-step maximization of the lower bound over ``P = U_t diag(sqrt(lam)) V^H``.

Outer loop: power allocation over the scaled simplex (concave, solved by
projected gradient ascent), then right singular vectors over the unitary
group (Riemannian gradient ascent with geodesic retraction).  Both inner
solvers use Armijo backtracking, so the bound never decreases.
"""

from dataclasses import dataclass, field

import numpy as np

from faprec.errors import ConfigError, PreconditionError
from faprec.infotheory import (
    BoundContext,
    bound_from_weights,
    grad_unitary,
    lambda_weights,
    lower_bound,
)

SIGMA2_RANGE = (1e-12, 1e12)


@dataclass(frozen=True)
class Precoder:
    """``P = U_P diag(sqrt(lam)) V_P^H`` kept in factored form."""

    u_p: np.ndarray = field(repr=False)
    lam: np.ndarray
    v_p: np.ndarray = field(repr=False)

    @property
    def matrix(self):
        return (self.u_p * np.sqrt(self.lam)) @ self.v_p.conj().T

    @property
    def p_tilde(self):
        """``diag(sqrt(lam)) V^H``, the part of ``P`` left after ``U_P``."""
        return np.sqrt(self.lam)[:, None] * self.v_p.conj().T

    @property
    def power(self):
        p = self.matrix
        return float(np.real(np.trace(p @ p.conj().T)))


@dataclass(frozen=True)
class SolverOptions:
    max_outer_iters: int = 50
    max_inner_iters: int = 500
    tol_bound: float = 1e-6
    tol_power: float = 1e-10
    tol_unitary: float = 1e-8
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    initial_step: float = 1.0
    max_step: float = 1e4
    max_backtracks: int = 60

    def __post_init__(self):
        for name in ("max_outer_iters", "max_inner_iters", "tol_bound", "tol_power",
                     "tol_unitary", "armijo_c", "initial_step", "max_step", "max_backtracks"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"solver option {name} must be positive")
        if not 0 < self.backtrack < 1:
            raise ConfigError("backtracking factor must lie in (0, 1)")


@dataclass(frozen=True)
class SubproblemResult:
    x: np.ndarray
    value: float
    iterations: int
    converged: bool


@dataclass(frozen=True)
class OptimizerReport:
    iterations: int
    bound_trajectory: list
    converged: bool
    final: Precoder


def project_simplex(v, total):
    """Euclidean projection onto ``{x >= 0, sum(x) = total}`` (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - total
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    theta = css[rho] / (rho + 1)
    return np.maximum(v - theta, 0.0)


def optimize_power(ctx, lambda0, v_p, opts=SolverOptions()):
    """Maximize the bound over ``lam`` with ``V`` fixed.

    The objective is concave in ``lam``, so the stationary point reached by
    projected gradient ascent is the subproblem's global maximum.
    """
    nt = ctx.nt
    weights = lambda_weights(ctx, v_p)
    lam = project_simplex(lambda0, nt)
    f, g = bound_from_weights(ctx, weights, lam)
    step = opts.initial_step
    for it in range(1, opts.max_inner_iters + 1):
        pg = project_simplex(lam + g, nt) - lam
        if np.linalg.norm(pg) <= opts.tol_power:
            return SubproblemResult(lam, f, it - 1, True)
        t = min(2.0 * step, opts.max_step) if it > 1 else step
        for _ in range(opts.max_backtracks):
            cand = project_simplex(lam + t * g, nt)
            fc, gc = bound_from_weights(ctx, weights, cand)
            if fc >= f + opts.armijo_c * (g @ (cand - lam)):
                break
            t *= opts.backtrack
        else:
            # no ascent left at working precision
            return SubproblemResult(lam, f, it, bool(np.linalg.norm(pg) <= 1e3 * opts.tol_power))
        if fc < f:
            return SubproblemResult(lam, f, it, False)
        lam, f, g, step = cand, fc, gc, t
    return SubproblemResult(lam, f, opts.max_inner_iters, False)


def riemannian_gradient(v, g):
    """Tangent-space ascent direction ``Z = G - V G^H V`` at unitary ``V``."""
    return g - v @ g.conj().T @ v


def _expm_skew(omega):
    """``expm`` of a skew-Hermitian matrix via a Hermitian eigendecomposition."""
    w, u = np.linalg.eigh(1j * omega)
    return (u * np.exp(-1j * w)) @ u.conj().T


def stiefel_step(v, euclidean_grad, step):
    """Move along the geodesic ``V expm(step * V^H Z)``."""
    z = riemannian_gradient(v, euclidean_grad)
    omega = v.conj().T @ z
    omega = 0.5 * (omega - omega.conj().T)
    return v @ _expm_skew(step * omega)


def optimize_unitary(ctx, lam, v0, opts=SolverOptions()):
    """Local maximization of the bound over unitary ``V`` with ``lam`` fixed."""
    v = np.asarray(v0, dtype=complex)
    lam = np.asarray(lam, dtype=float)
    f = lower_bound(ctx, lam, v, check=False)
    step = opts.initial_step
    for it in range(1, opts.max_inner_iters + 1):
        g = grad_unitary(ctx, lam, v)
        z = riemannian_gradient(v, g)
        slope = float(np.real(np.vdot(z, z)))
        if np.sqrt(slope) <= opts.tol_unitary:
            return SubproblemResult(v, f, it - 1, True)
        t = min(2.0 * step, opts.max_step) if it > 1 else step
        for _ in range(opts.max_backtracks):
            cand = stiefel_step(v, g, t)
            fc = lower_bound(ctx, lam, cand, check=False)
            if fc >= f + opts.armijo_c * t * slope:
                break
            t *= opts.backtrack
        else:
            return SubproblemResult(v, f, it, False)
        if fc < f:
            return SubproblemResult(v, f, it, False)
        v, f, step = cand, fc, t
    return SubproblemResult(v, f, opts.max_inner_iters, False)


def assemble_precoder(u_t, lam, v_p):
    """Build ``U_t diag(sqrt(lam)) V^H`` with the power renormalized to exactly ``Nt``."""
    lam = np.asarray(lam, dtype=float)
    nt = lam.size
    if np.any(lam < -1e-6) or abs(lam.sum() - nt) > 1e-6:
        raise PreconditionError(f"power vector {lam} violates the sum-power constraint")
    v_p = np.asarray(v_p)
    if np.max(np.abs(v_p.conj().T @ v_p - np.eye(nt))) > 1e-6:
        raise PreconditionError("V is not unitary")
    lam = np.maximum(lam, 0.0)
    lam = lam * (nt / lam.sum())
    return Precoder(np.asarray(u_t), lam, v_p)


def _check_sigma2(sigma2):
    lo, hi = SIGMA2_RANGE
    if not lo <= sigma2 <= hi:
        raise ConfigError(f"noise variance {sigma2:g} outside the supported range [{lo:g}, {hi:g}]")


def two_step(stats, diffs, sigma2, lambda0=None, v0=None, opts=SolverOptions()):
    """Alternate power and unitary updates until the bound stops improving.

    Defaults start from uniform power and ``V = I``.  The trajectory holds
    the bound at the start and after every half-step.
    """
    _check_sigma2(sigma2)
    ctx = BoundContext.from_statistics(stats, diffs, sigma2)
    nt = ctx.nt
    lam = np.full(nt, 1.0) if lambda0 is None else np.asarray(lambda0, dtype=float)
    v = np.eye(nt, dtype=complex) if v0 is None else np.asarray(v0, dtype=complex)
    lower_bound(ctx, lam, v)  # validates the starting point
    f = lower_bound(ctx, lam, v, check=False)
    trajectory = [f]
    converged = False
    it = 0
    for it in range(1, opts.max_outer_iters + 1):
        f_start = f
        res = optimize_power(ctx, lam, v, opts)
        lam = res.x
        trajectory.append(res.value)
        res = optimize_unitary(ctx, lam, v, opts)
        v, f = res.x, res.value
        trajectory.append(f)
        if f - f_start < opts.tol_bound:
            converged = True
            break
    return OptimizerReport(it, trajectory, converged, assemble_precoder(stats.u_t, lam, v))


def haar_unitary(n, rng):
    """Haar-distributed unitary: QR of a complex Gaussian with phase-fixed ``R`` diagonal."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_start(nt, rng):
    """Uniform point on the power simplex and a Haar-random ``V``."""
    lam = rng.dirichlet(np.ones(nt)) * nt
    return lam, haar_unitary(nt, rng)

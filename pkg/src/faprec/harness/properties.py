"""Executable invariants of every module, with measured values.

``fast`` runs the deterministic checks (seconds); ``full`` adds the Monte
Carlo and sampling-based ones.  ``fault="grad"`` perturbs the analytic
gradients by 0.1% as a negative control: the gradient checks must then fail.
"""

from dataclasses import dataclass

import numpy as np

from faprec.baselines import (
    beamforming,
    ergodic_gaussian_capacity,
    gaussian_capacity_precoder,
    no_precoding,
)
from faprec.channel import ChannelStatistics, eigendecompose, exp_correlation
from faprec.constellation import difference_set, enumerate_vectors, make_constellation
from faprec.harness.config import ExperimentConfig, sigma2_from_snr_db, snr_db_from_sigma2
from faprec.infotheory import (
    BoundContext,
    average_mi,
    grad_lambda,
    grad_unitary,
    instantaneous_mi_given_noise,
    jensen_gap,
    lower_bound,
    lower_bound_shifted,
    min_distance,
)
from faprec.optim import (
    SolverOptions,
    assemble_precoder,
    haar_unitary,
    project_simplex,
    random_start,
    stiefel_step,
    two_step,
)
from faprec.streams import PROPERTY, complex_normal, substream

FD_STEP = 1e-5


@dataclass(frozen=True)
class PropertyResult:
    name: str
    passed: bool
    measured: float
    threshold: float

    def as_dict(self):
        return {"name": self.name, "passed": bool(self.passed),
                "measured": float(self.measured), "threshold": float(self.threshold)}


def _setup(rho_t=0.8, rho_r=0.5):
    stats = ChannelStatistics.exponential(2, 2, rho_t, rho_r)
    diffs = difference_set(enumerate_vectors(make_constellation("qpsk"), 2))
    return stats, diffs


def _rng(*key):
    return substream(20110, PROPERTY, *key)


def _le(name, measured, threshold):
    return PropertyResult(name, measured <= threshold, measured, threshold)


def _ge(name, measured, threshold):
    return PropertyResult(name, measured >= threshold, measured, threshold)


def _grads(ctx, lam, v, fault):
    gl, gv = grad_lambda(ctx, lam, v), grad_unitary(ctx, lam, v)
    if fault == "grad":
        gl, gv = gl * 1.001, gv * 1.001
    return gl, gv


def fd_grad_lambda_error(ctx, lam, v, direction, fault=None):
    """Normalized error of the analytic directional derivative along ``direction``."""
    gl, _ = _grads(ctx, lam, v, fault)
    h = FD_STEP
    fd = (lower_bound(ctx, lam + h * direction, v, check=False)
          - lower_bound(ctx, lam - h * direction, v, check=False)) / (2 * h)
    an = gl @ direction
    tangent = gl - gl.mean()
    return abs(fd - an) / max(np.linalg.norm(tangent) * np.linalg.norm(direction), 1e-300)


def fd_grad_unitary_error(ctx, lam, v, direction, fault=None):
    _, gv = _grads(ctx, lam, v, fault)
    h = FD_STEP
    fd = (lower_bound(ctx, lam, v + h * direction, check=False)
          - lower_bound(ctx, lam, v - h * direction, check=False)) / (2 * h)
    an = 2.0 * np.real(np.vdot(gv, direction))
    return abs(fd - an) / max(2.0 * np.linalg.norm(gv) * np.linalg.norm(direction), 1e-300)


# -- fast checks --------------------------------------------------------------


def check_constellation(fault=None):
    worst_energy = worst_scatter = worst_anti = 0.0
    for scheme, order in (("bpsk", 2), ("qpsk", 4), ("qam", 16)):
        c = make_constellation(scheme, order)
        for nt in (1, 2):
            sv = enumerate_vectors(c, nt)
            x = sv.vectors
            cov = x.T @ x.conj() / len(sv)
            worst_energy = max(worst_energy, np.max(np.abs(cov - np.eye(nt))))
            d = difference_set(sv)
            worst_anti = max(worst_anti, np.max(np.abs(d.e + d.e.transpose(1, 0, 2))))
            worst_scatter = max(worst_scatter, np.max(np.abs(d.scatter() - d.scalar() * np.eye(nt))))
    return [_le("constellation.energy", worst_energy, 1e-12),
            _le("constellation.antisymmetry", worst_anti, 0.0),
            _le("constellation.scatter_scalar", worst_scatter, 1e-10)]


def check_channel(fault=None):
    min_eig = np.inf
    worst_sqrt = 0.0
    for n in range(1, 9):
        for rho in np.arange(10) / 10:
            psi = exp_correlation(n, rho)
            u, w = eigendecompose(psi)
            min_eig = min(min_eig, w[-1])
            s = (u * np.sqrt(w)) @ u.conj().T
            worst_sqrt = max(worst_sqrt, np.max(np.abs(s @ s.conj().T - psi)))
    return [_ge("channel.exp_correlation_pd", min_eig, 1e-300),
            _le("channel.sqrt_consistency", worst_sqrt, 1e-10)]


def check_bound_range_and_monotonicity(fault=None):
    stats, diffs = _setup()
    rng = _rng(1)
    worst_range = 0.0
    worst_mono = -np.inf
    lo, hi = -jensen_gap(2), diffs.log2_size - jensen_gap(2)
    for _ in range(10):
        lam, v = random_start(2, rng)
        prev = -np.inf
        for snr in (-30, -10, 0, 10, 30):
            ctx = BoundContext.from_statistics(stats, diffs, sigma2_from_snr_db(snr))
            b = lower_bound(ctx, lam, v)
            worst_range = max(worst_range, lo - b, b - hi)
            worst_mono = max(worst_mono, prev - b)
            prev = b
    return [_le("infotheory.bound_range", worst_range, 0.0),
            _le("infotheory.bound_monotone_in_snr", worst_mono, 0.0)]


def check_invariances(fault=None):
    stats, diffs = _setup()
    rng = _rng(2)
    ctx = BoundContext.from_statistics(stats, diffs, 1.0)
    worst_phase = 0.0
    for _ in range(20):
        lam, v = random_start(2, rng)
        phi = np.exp(2j * np.pi * rng.random(2))
        worst_phase = max(worst_phase, abs(lower_bound(ctx, lam, v) - lower_bound(ctx, lam, v * phi)))
    worst_rx = 0.0
    for _ in range(5):
        h = complex_normal(rng, (2, 2))
        lam, v = random_start(2, rng)
        p = assemble_precoder(stats.u_t, lam, v).matrix
        noise = complex_normal(rng, (diffs.n_vectors, 8, 2))
        q = haar_unitary(2, rng)
        a = instantaneous_mi_given_noise(h, p, diffs, 1.0, noise)
        b = instantaneous_mi_given_noise(q @ h, p, diffs, 1.0, noise @ q.T)
        worst_rx = max(worst_rx, abs(a - b))
    # left singular vectors never enter the bound
    lam, v = random_start(2, rng)
    p1 = assemble_precoder(stats.u_t, lam, v)
    p2 = assemble_precoder(haar_unitary(2, rng), lam, v)
    prop1 = abs(lower_bound(ctx, p1.lam, p1.v_p) - lower_bound(ctx, p2.lam, p2.v_p))
    return [_le("infotheory.phase_invariance", worst_phase, 1e-12),
            _le("infotheory.receive_unitary_invariance", worst_rx, 1e-10),
            _le("optim.left_vectors_do_not_enter_bound", prop1, 0.0)]


def check_gradients(fault=None):
    stats, diffs = _setup()
    rng = _rng(3)
    worst_l = worst_v = 0.0
    for i in range(20):
        snr = (-10, -5, 0, 5, 10)[i % 5]
        ctx = BoundContext.from_statistics(stats, diffs, sigma2_from_snr_db(snr))
        lam = 0.1 + 1.8 * rng.dirichlet(np.ones(2))  # interior, total 2
        v = haar_unitary(2, rng)
        d = rng.standard_normal(2)
        d -= d.mean()
        worst_l = max(worst_l, fd_grad_lambda_error(ctx, lam, v, d, fault))
        dv = complex_normal(rng, (2, 2))
        worst_v = max(worst_v, fd_grad_unitary_error(ctx, lam, v, dv, fault))
    return [_le("infotheory.grad_lambda_fd", worst_l, 1e-5),
            _le("infotheory.grad_unitary_fd", worst_v, 1e-5)]


def check_concavity(fault=None):
    stats, diffs = _setup()
    rng = _rng(4)
    worst = -np.inf
    for i in range(100):
        ctx = BoundContext.from_statistics(stats, diffs, sigma2_from_snr_db((-10, 0, 10, 20)[i % 4]))
        v = haar_unitary(2, rng)
        l1, l2 = (rng.dirichlet(np.ones(2)) * 2 for _ in range(2))
        mid = lower_bound(ctx, (l1 + l2) / 2, v)
        chord = 0.5 * (lower_bound(ctx, l1, v) + lower_bound(ctx, l2, v))
        worst = max(worst, chord - mid)
    return [_le("infotheory.concavity_in_lambda", worst, 1e-10)]


def check_low_snr_form(fault=None):
    """At -60 dB the bound rises above its floor like Tr(Sigma_r) Tr(Sigma_t Lam) / (sigma2 ln 2)."""
    stats, diffs = _setup()
    rng = _rng(5)
    sigma2 = sigma2_from_snr_db(-60)
    ctx = BoundContext.from_statistics(stats, diffs, sigma2)
    worst = 0.0
    for _ in range(20):
        lam, v = random_start(2, rng)
        rise = lower_bound(ctx, lam, v) + jensen_gap(2)
        pred = stats.sigma_r.sum() * (lam @ stats.sigma_t) / (sigma2 * np.log(2))
        worst = max(worst, abs(rise / pred - 1.0))
    return [_le("optim.low_snr_trace_form", worst, 1e-3)]


def check_optimizer_mechanics(fault=None):
    rng = _rng(6)
    worst_kkt = 0.0
    for _ in range(50):
        x = rng.standard_normal(4) * 3
        lam = project_simplex(x, 4.0)
        theta = np.mean((x - lam)[lam > 0])
        worst_kkt = max(worst_kkt, abs(lam.sum() - 4.0), np.max(np.abs(lam - np.maximum(x - theta, 0))))
    v = haar_unitary(3, rng)
    for _ in range(1000):
        v = stiefel_step(v, complex_normal(rng, (3, 3)), 0.1)
    drift = np.max(np.abs(v.conj().T @ v - np.eye(3)))

    stats, diffs = _setup()
    worst_step = -np.inf
    worst_power = 0.0
    for i in range(10):
        lam0, v0 = random_start(2, rng)
        rep = two_step(stats, diffs, sigma2_from_snr_db((-10, -5, 0, 5, 10)[i % 5]), lam0, v0)
        t = rep.bound_trajectory
        worst_step = max(worst_step, max(a - b for a, b in zip(t, t[1:])))
        worst_power = max(worst_power, abs(rep.final.power - 2))
    for p in (no_precoding(2), beamforming(stats)):
        worst_power = max(worst_power, abs(p.power - 2))
    snr_rt = max(abs(snr_db_from_sigma2(sigma2_from_snr_db(s)) - s) for s in np.linspace(-60, 60, 241))
    return [_le("optim.simplex_projection_kkt", worst_kkt, 1e-12),
            _le("optim.stiefel_drift_1000_steps", drift, 1e-8),
            _le("optim.half_step_monotone", worst_step, 1e-9),
            _le("optim.power_constraint", worst_power, 1e-12),
            _le("harness.db_roundtrip", snr_rt, 1e-12)]


FAST = (check_constellation, check_channel, check_bound_range_and_monotonicity, check_invariances,
        check_gradients, check_concavity, check_low_snr_form, check_optimizer_mechanics)


# -- full checks (Monte Carlo / sampling) ---------------------------------------


def check_gaussian_expectation(fault=None):
    """E_n exp(-|v + n|^2 / s2) = 2^-Nr exp(-|v|^2 / (2 s2)) for n ~ CN(0, s2 I)."""
    rng = _rng(7)
    worst = 0.0
    for s2 in (0.5, 1.0, 2.0):
        v = complex_normal(rng, 2)
        n = complex_normal(rng, (200_000, 2), s2)
        vals = np.exp(-np.sum(np.abs(v + n) ** 2, axis=1) / s2)
        exact = 2.0**-2 * np.exp(-np.sum(np.abs(v) ** 2) / (2 * s2))
        worst = max(worst, abs(vals.mean() - exact) / (vals.std(ddof=1) / np.sqrt(vals.size)))
    return [_le("infotheory.gaussian_expectation_identity_z", worst, 3.0)]


def check_jensen(fault=None, n_channel=500, n_noise=20):
    stats, diffs = _setup()
    rng = _rng(8)
    worst = -np.inf
    for _ in range(10):
        lam, v = random_start(2, rng)
        p = assemble_precoder(stats.u_t, lam, v)
        for snr in (-10, -5, 0, 5, 10):
            s2 = sigma2_from_snr_db(snr)
            est = average_mi(stats, diffs, p.matrix, s2, n_channel, n_noise, seed=1)
            b = lower_bound(BoundContext.from_statistics(stats, diffs, s2), p.lam, p.v_p)
            worst = max(worst, (b - est.mean_bits) / est.std_error)
    return [_le("infotheory.jensen_z", worst, 3.0)]


def high_snr_ordering(n_pairs=20, snr_db=30.0, separation=1.1, seed_key=9, rng=None):
    """Count pairs of random precoders whose bound order agrees with their d_min order.

    Only pairs whose ``d_min`` values differ by the factor ``separation``
    count.  Returns ``(agree, total)``.
    """
    stats, diffs = _setup()
    rng = _rng(seed_key) if rng is None else rng
    ctx = BoundContext.from_statistics(stats, diffs, sigma2_from_snr_db(snr_db))
    agree = total = 0
    while total < n_pairs:
        a, b = random_start(2, rng), random_start(2, rng)
        da, db = (min_distance(assemble_precoder(stats.u_t, *x).p_tilde, stats.sigma_t, diffs) for x in (a, b))
        if max(da, db) < separation * min(da, db):
            continue
        total += 1
        agree += (da > db) == (lower_bound(ctx, *a) > lower_bound(ctx, *b))
    return agree, total


def check_high_snr_ordering(fault=None):
    agree, _ = high_snr_ordering()
    return [_ge("optim.high_snr_dmin_ordering", agree, 19)]


def check_dominance_and_ceiling(fault=None):
    stats, diffs = _setup()
    cfg = ExperimentConfig(n_channel=500, n_noise=20, n_restarts=4)
    from faprec.harness.experiments import best_two_step

    worst_dom = worst_ceil = -np.inf
    for snr in (-5, 5):
        s2 = sigma2_from_snr_db(snr)
        mi = {}
        prop = best_two_step(stats, diffs, s2, cfg).final
        for name, p in (("proposed", prop), ("none", no_precoding(2)), ("beam", beamforming(stats))):
            mi[name] = average_mi(stats, diffs, p.matrix, s2, cfg.n_channel, cfg.n_noise, seed=2)
        for other in ("none", "beam"):
            z = (mi[other].mean_bits - mi["proposed"].mean_bits) / mi[other].joint_std_error(mi["proposed"])
            worst_dom = max(worst_dom, z)
        cov = gaussian_capacity_precoder(stats, s2, 500, seed=2)
        cap = ergodic_gaussian_capacity(stats, cov.q, s2, cfg.n_channel, seed=2)
        for est in mi.values():
            worst_ceil = max(worst_ceil, (est.mean_bits - cap.mean_bits) / est.joint_std_error(cap))
    return [_le("baselines.strategy_dominance_z", worst_dom, 3.0),
            _le("baselines.gaussian_ceiling_z", worst_ceil, 3.0)]


def check_tightness(fault=None):
    stats, diffs = _setup()
    worst = 0.0
    p = no_precoding(2)
    v_eq = stats.u_t  # identity precoder = U_t diag(1) U_t^H
    for snr in (-10, 20):
        s2 = sigma2_from_snr_db(snr)
        est = average_mi(stats, diffs, p.matrix, s2, 1000, 30, seed=3)
        b = lower_bound_shifted(BoundContext.from_statistics(stats, diffs, s2), p.lam, v_eq)
        worst = max(worst, abs(b - est.mean_bits))
    return [_le("infotheory.shifted_bound_tightness", worst, 0.05)]


def check_reproducibility(fault=None):
    from faprec.harness.experiments import run_bound_sweep
    from faprec.harness.records import render_csv

    base = dict(snr_grid_db=[-10.0, 0.0, 10.0], n_channel=64, n_noise=8, master_seed=5)
    one = render_csv(ExperimentConfig(threads=1, **base), "bound-sweep", run_bound_sweep(ExperimentConfig(threads=1, **base)))
    two = render_csv(ExperimentConfig(threads=2, **base), "bound-sweep", run_bound_sweep(ExperimentConfig(threads=2, **base)))
    return [PropertyResult("harness.bit_reproducible", one == two, float(one != two), 0.0)]


FULL = FAST + (check_gaussian_expectation, check_jensen, check_high_snr_ordering,
               check_dominance_and_ceiling, check_tightness, check_reproducibility)


def run_property_suite(level="fast", fault=None):
    """Run every check of ``level``; returns a list of :class:`PropertyResult`."""
    if level not in ("fast", "full"):
        raise ValueError(f"level must be 'fast' or 'full', got {level!r}")
    results = []
    for check in FAST if level == "fast" else FULL:
        results.extend(check(fault))
    return results

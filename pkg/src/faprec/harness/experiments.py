"""Experiment sweeps: bound tightness, initialization study, strategy comparison.

Each sweep point / initialization is an independent job whose randomness
comes from its own substream, so output is identical for any worker count.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from faprec.baselines import (
    beamforming,
    ergodic_gaussian_capacity,
    gaussian_capacity_precoder,
    no_precoding,
)
from faprec.harness.config import sigma2_from_snr_db
from faprec.harness.records import SweepRecord
from faprec.infotheory import (
    BoundContext,
    average_mi,
    jensen_gap,
    lower_bound_precoder,
    min_distance,
)
from faprec.optim import random_start, two_step
from faprec.streams import INIT, RESTART, substream

BOUND_SWEEP_GRID = "-20:20:2.5"
COMPARE_GRID = "-10:15:1"


def parallel_map(fn, items, workers):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


class _Problem:
    """Per-process cache of the statistics and difference set for a config."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.stats = cfg.statistics()
        self.diffs = cfg.difference_set()

    def ctx(self, sigma2):
        return BoundContext.from_statistics(self.stats, self.diffs, sigma2)

    def record(self, snr_db, strategy, p, mi, iterations=0):
        ctx = self.ctx(sigma2_from_snr_db(snr_db))
        bound = lower_bound_precoder(ctx, p)
        p_tilde = self.stats.u_t.conj().T @ p
        return SweepRecord(float(snr_db), strategy, mi.mean_bits, mi.std_error, bound,
                           bound + jensen_gap(self.stats.nr),
                           min_distance(p_tilde, self.stats.sigma_t, self.diffs),
                           int(iterations), int(self.cfg.master_seed))

    def mi(self, p, sigma2):
        c = self.cfg
        return average_mi(self.stats, self.diffs, p, sigma2, c.n_channel, c.n_noise, c.master_seed)


# -- bound sweep -----------------------------------------------------------


def _bound_point(args):
    cfg, snr_db = args
    prob = _Problem(cfg)
    p = no_precoding(cfg.nt).matrix
    return prob.record(snr_db, "none", p, prob.mi(p, sigma2_from_snr_db(snr_db)))


def run_bound_sweep(cfg):
    """MC average MI, bound and shifted bound of the identity precoder per SNR."""
    grid = cfg.grid(BOUND_SWEEP_GRID)
    return parallel_map(_bound_point, [(cfg, s) for s in grid], cfg.threads)


# -- initialization study -----------------------------------------------------


@dataclass(frozen=True)
class InitRecord:
    record: SweepRecord
    init_index: int
    lam0: tuple
    lam: tuple
    monotone: bool
    converged: bool


def _is_monotone(traj, slack=1e-9):
    return all(b >= a - slack for a, b in zip(traj, traj[1:]))


def _init_point(args):
    cfg, i = args
    prob = _Problem(cfg)
    sigma2 = sigma2_from_snr_db(cfg.study_snr_db)
    lam0, v0 = random_start(cfg.nt, substream(cfg.master_seed, INIT, i))
    rep = two_step(prob.stats, prob.diffs, sigma2, lam0, v0, cfg.solver_options())
    p = rep.final.matrix
    rec = prob.record(cfg.study_snr_db, "proposed", p, prob.mi(p, sigma2), rep.iterations)
    return InitRecord(rec, i, tuple(lam0), tuple(rep.final.lam), _is_monotone(rep.bound_trajectory),
                      rep.converged)


def gaussian_reference(cfg, snr_db, stats=None):
    """Optimized Gaussian-input capacity at one SNR, plus its covariance."""
    stats = stats or cfg.statistics()
    sigma2 = sigma2_from_snr_db(snr_db)
    cov = gaussian_capacity_precoder(stats, sigma2, cfg.n_batch, cfg.master_seed)
    return cov, ergodic_gaussian_capacity(stats, cov.q, sigma2, cfg.n_channel, cfg.master_seed)


def empirical_cdf(values, n_grid=101):
    v = np.sort(np.asarray(values, dtype=float))
    xs = np.linspace(v[0], v[-1], n_grid)
    return xs, np.searchsorted(v, xs, side="right") / v.size


def run_init_study(cfg):
    """Run the two-step algorithm from ``cfg.n_inits`` random starts.

    Returns ``(rows, summary)``; ``summary`` holds the distribution of the
    optimized MI and the Gaussian-input capacity at the study SNR.
    """
    rows = parallel_map(_init_point, [(cfg, i) for i in range(cfg.n_inits)], cfg.threads)
    mi = np.array([r.record.mi_bits for r in rows])
    _, cap = gaussian_reference(cfg, cfg.study_snr_db)
    xs, fs = empirical_cdf(mi)
    summary = {
        "snr_db": cfg.study_snr_db,
        "n_inits": len(rows),
        "min_mi": float(mi.min()),
        "median_mi": float(np.median(mi)),
        "max_mi": float(mi.max()),
        "frac_ge_1.5": float(np.mean(mi >= 1.5)),
        "gaussian_capacity": cap.mean_bits,
        "gaussian_capacity_stderr": cap.std_error,
        "best_over_capacity": float(mi.max() / cap.mean_bits),
        "all_monotone": all(r.monotone for r in rows),
        "cdf_x": [float(x) for x in xs],
        "cdf_f": [float(f) for f in fs],
    }
    return rows, summary


# -- strategy comparison -----------------------------------------------------------


def best_two_step(stats, diffs, sigma2, cfg):
    """Best bound over the default start plus ``n_restarts - 1`` random starts.

    ``V = I`` is a stationary point of the unitary step for symmetric
    alphabets, so the default start alone can stall there.
    """
    opts = cfg.solver_options()
    best = two_step(stats, diffs, sigma2, opts=opts)
    for r in range(1, cfg.n_restarts):
        lam0, v0 = random_start(stats.nt, substream(cfg.master_seed, RESTART, r))
        rep = two_step(stats, diffs, sigma2, lam0, v0, opts)
        if rep.bound_trajectory[-1] > best.bound_trajectory[-1]:
            best = rep
    return best


def _compare_point(args):
    cfg, snr_db = args
    prob = _Problem(cfg)
    stats, sigma2 = prob.stats, sigma2_from_snr_db(snr_db)
    rows = []
    cov = None
    for s in cfg.strategies:
        it = 0
        if s == "none":
            p = no_precoding(cfg.nt).matrix
        elif s == "beamforming":
            p = beamforming(stats).matrix
        elif s == "gaussian":
            cov = gaussian_capacity_precoder(stats, sigma2, cfg.n_batch, cfg.master_seed)
            p = cov.as_precoder(stats).matrix
        else:
            rep = best_two_step(stats, prob.diffs, sigma2, cfg)
            p, it = rep.final.matrix, rep.iterations
        rows.append(prob.record(snr_db, s, p, prob.mi(p, sigma2), it))
    # Gaussian-input reference curves
    if cov is None:
        cov = gaussian_capacity_precoder(stats, sigma2, cfg.n_batch, cfg.master_seed)
    nan = float("nan")
    for name, q in (("gaussian-input", cov.q), ("gaussian-input-none", np.eye(cfg.nt))):
        cap = ergodic_gaussian_capacity(stats, q, sigma2, cfg.n_channel, cfg.master_seed)
        rows.append(SweepRecord(float(snr_db), name, cap.mean_bits, cap.std_error, nan, nan, nan, 0,
                                int(cfg.master_seed)))
    return rows


def snr_for_mi(snrs, mis, target):
    """SNR at which a curve first reaches ``target`` (linear interpolation), else ``None``."""
    for i in range(len(snrs)):
        if mis[i] >= target:
            if i == 0:
                return float(snrs[0]) if mis[0] == target else None
            s0, s1, m0, m1 = snrs[i - 1], snrs[i], mis[i - 1], mis[i]
            return float(s0 + (target - m0) * (s1 - s0) / (m1 - m0))
    return None


def snr_gaps(rows, target, reference="proposed"):
    """Horizontal gaps (dB) of every strategy relative to ``reference`` at MI = ``target``."""
    curves = {}
    for r in rows:
        curves.setdefault(r.strategy, []).append((r.snr_db, r.mi_bits))
    needed = {}
    for s, pts in curves.items():
        pts.sort()
        needed[s] = snr_for_mi([p[0] for p in pts], [p[1] for p in pts], target)
    ref = needed.get(reference)
    out = []
    for s, snr in needed.items():
        gap = None if snr is None or ref is None else snr - ref
        out.append({"target_mi": target, "strategy": s,
                    "snr_needed_db": math.nan if snr is None else snr,
                    "gap_db_vs_" + reference: math.nan if gap is None else gap})
    return out


def run_strategy_compare(cfg):
    """MI versus SNR for each strategy plus the Gaussian-input references.

    Returns ``(rows, gaps)``.
    """
    grid = cfg.grid(COMPARE_GRID)
    parts = parallel_map(_compare_point, [(cfg, s) for s in grid], cfg.threads)
    rows = [r for part in parts for r in part]
    ref = "proposed" if "proposed" in cfg.strategies else cfg.strategies[0]
    return rows, snr_gaps(rows, cfg.target_mi, ref)


def run_optimize(cfg, snr_db):
    """Single design at one SNR; returns the report and its MC estimate."""
    prob = _Problem(cfg)
    sigma2 = sigma2_from_snr_db(snr_db)
    rep = best_two_step(prob.stats, prob.diffs, sigma2, cfg)
    mi = prob.mi(rep.final.matrix, sigma2)
    return rep, prob.record(snr_db, "proposed", rep.final.matrix, mi, rep.iterations)

"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 property failure, 3 I/O error.
"""

import argparse
import json
import os
import sys

import numpy as np

from faprec.errors import ConfigError
from faprec.harness import records
from faprec.harness.config import build_config
from faprec.harness.experiments import (
    run_bound_sweep,
    run_init_study,
    run_optimize,
    run_strategy_compare,
)
from faprec.harness.properties import run_property_suite
from faprec.harness.svg import line_chart

EXIT_OK, EXIT_CONFIG, EXIT_PROPERTY, EXIT_IO = 0, 1, 2, 3

_OVERRIDES = ("seed", "snr_grid", "modulation", "nt", "nr", "rho_t", "rho_r", "strategy",
              "n_channel", "n_noise", "n_inits", "n_restarts", "n_batch", "study_snr", "target_mi",
              "psi_t_path", "psi_r_path", "max_outer_iters", "max_inner_iters", "tol_bound",
              "threads", "out", "svg")


def _common(p):
    p.add_argument("--config", metavar="PATH", help="flat 'key = value' config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--snr-grid", metavar="A:B:STEP", help="SNR grid in dB, or a comma list")
    p.add_argument("--modulation", help="bpsk, qpsk, 8psk, 16qam, ...")
    p.add_argument("--nt", type=int)
    p.add_argument("--nr", type=int)
    p.add_argument("--rho-t", type=float)
    p.add_argument("--rho-r", type=float)
    p.add_argument("--psi-t-path", metavar="PATH", help="transmit correlation matrix text file")
    p.add_argument("--psi-r-path", metavar="PATH", help="receive correlation matrix text file")
    p.add_argument("--strategy", help="comma list of none,beamforming,gaussian,proposed")
    p.add_argument("--n-channel", type=int)
    p.add_argument("--n-noise", type=int)
    p.add_argument("--n-inits", type=int)
    p.add_argument("--n-restarts", type=int)
    p.add_argument("--n-batch", type=int, help="channel batch for the Gaussian-capacity precoder")
    p.add_argument("--study-snr", type=float, help="SNR (dB) of the initialization study")
    p.add_argument("--target-mi", type=float, help="MI level (bits) for SNR-gap reports")
    p.add_argument("--max-outer-iters", type=int)
    p.add_argument("--max-inner-iters", type=int)
    p.add_argument("--tol-bound", type=float)
    p.add_argument("--threads", type=int, help="worker processes")
    p.add_argument("--out", metavar="PATH", help="CSV output path (default: stdout)")
    p.add_argument("--svg", metavar="PATH", help="also write an SVG line chart")


def build_parser():
    parser = argparse.ArgumentParser(prog="faprec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("bound-sweep", "MC MI vs lower bound for the identity precoder"),
                        ("init-study", "optimized MI distribution over random initializations"),
                        ("compare", "MI vs SNR for several precoding strategies"),
                        ("optimize", "design one precoder and print it")):
        _common(sub.add_parser(name, help=help_))
    p = sub.add_parser("properties", help="run the invariant checks")
    p.add_argument("--level", choices=("fast", "full"), default="fast")
    p.add_argument("--inject-fault", choices=("grad",), default=None,
                   help="negative control: perturb analytic gradients")
    p.add_argument("--out", metavar="PATH")
    return parser


def _config(args):
    overrides = {k: getattr(args, k, None) for k in _OVERRIDES}
    return build_config(args.config, overrides)


def _emit(path, text):
    if path:
        records.write_text(path, text)
    else:
        sys.stdout.write(text)


def _sibling(path, suffix):
    root, ext = os.path.splitext(path)
    return f"{root}_{suffix}{ext or '.csv'}"


def _chart(cfg, rows, title, with_bounds=False):
    series = {}
    for r in rows:
        xs, ys = series.setdefault(r.strategy, ([], []))
        xs.append(r.snr_db)
        ys.append(r.mi_bits)
    if with_bounds:
        series["lower bound"] = ([r.snr_db for r in rows], [r.bound_bits for r in rows])
        series["shifted bound"] = ([r.snr_db for r in rows], [r.shifted_bound_bits for r in rows])
    records.write_text(cfg.svg, line_chart(series, title, "SNR (dB)", "bits / channel use"))


def cmd_bound_sweep(cfg):
    rows = run_bound_sweep(cfg)
    _emit(cfg.out, records.render_csv(cfg, "bound-sweep", rows))
    if cfg.svg:
        _chart(cfg, rows, "Average MI and lower bound, no precoding", with_bounds=True)


def cmd_init_study(cfg):
    rows, summary = run_init_study(cfg)
    cols = records.COLUMNS + ("init_index",)
    dicts = [dict(vars(r.record), init_index=r.init_index) for r in rows]
    _emit(cfg.out, records.render_csv(cfg, "init-study", dicts, cols))
    if cfg.out:
        cdf = [{"mi_bits": x, "cdf": f} for x, f in zip(summary["cdf_x"], summary["cdf_f"])]
        records.write_text(_sibling(cfg.out, "cdf"), records.render_csv(cfg, "init-study-cdf", cdf, ("mi_bits", "cdf")))
    brief = {k: v for k, v in summary.items() if not k.startswith("cdf_")}
    sys.stderr.write(json.dumps(brief, sort_keys=True) + "\n")
    if cfg.svg:
        series = {"empirical CDF": (summary["cdf_x"], summary["cdf_f"])}
        records.write_text(cfg.svg, line_chart(series, "Optimized MI over initializations", "bits", "CDF"))


def cmd_compare(cfg):
    rows, gaps = run_strategy_compare(cfg)
    _emit(cfg.out, records.render_csv(cfg, "compare", rows))
    ref = next(k for k in gaps[0] if k.startswith("gap_db_vs_"))
    gap_text = records.render_csv(cfg, "compare-gaps", gaps, ("target_mi", "strategy", "snr_needed_db", ref))
    if cfg.out:
        records.write_text(_sibling(cfg.out, "gaps"), gap_text)
    else:
        sys.stdout.write(gap_text)
    if cfg.svg:
        _chart(cfg, rows, "Average MI versus SNR")


def cmd_optimize(cfg):
    snr = cfg.grid("-5")[0]
    rep, rec = run_optimize(cfg, snr)
    with np.printoptions(precision=6, suppress=True):
        lines = [f"snr_db = {snr}",
                 f"lambda = {rep.final.lam}",
                 f"lower_bound_bits = {rec.bound_bits:.9f}",
                 f"mi_bits = {rec.mi_bits:.6f} +- {rec.mi_stderr:.6f}",
                 f"outer_iterations = {rep.iterations} converged = {rep.converged}",
                 "P =", str(rep.final.matrix)]
    _emit(cfg.out, "\n".join(lines) + "\n")


def cmd_properties(args):
    results = run_property_suite(args.level, args.inject_fault)
    text = "".join(json.dumps(r.as_dict()) + "\n" for r in results)
    _emit(args.out, text)
    failed = [r.name for r in results if not r.passed]
    if failed:
        sys.stderr.write("failed: " + ", ".join(failed) + "\n")
        return EXIT_PROPERTY
    return EXIT_OK


COMMANDS = {"bound-sweep": cmd_bound_sweep, "init-study": cmd_init_study,
            "compare": cmd_compare, "optimize": cmd_optimize}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "properties":
            return cmd_properties(args)
        cfg = _config(args)
        COMMANDS[args.command](cfg)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except OSError as exc:
        sys.stderr.write(f"I/O error: {exc.filename or ''}: {exc.strerror or exc}\n")
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

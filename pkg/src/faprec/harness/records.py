"""CSV output with a provenance header."""

import csv
import dataclasses
import io
import json
import math
from dataclasses import dataclass

import faprec

COLUMNS = ("snr_db", "strategy", "mi_bits", "mi_stderr", "bound_bits",
           "shifted_bound_bits", "d_min", "iterations", "seed")


@dataclass(frozen=True)
class SweepRecord:
    snr_db: float
    strategy: str
    mi_bits: float
    mi_stderr: float
    bound_bits: float
    shifted_bound_bits: float
    d_min: float
    iterations: int
    seed: int


def _fmt(x):
    if isinstance(x, float):
        return "nan" if math.isnan(x) else format(x, ".12g")
    return str(x)


def header_lines(cfg, kind):
    return [
        f"# faprec {faprec.__version__} {kind}",
        f"# config_hash={cfg.config_hash()} seed={cfg.master_seed}",
        "# config=" + json.dumps(cfg.canonical(), sort_keys=True),
    ]


def render_csv(cfg, kind, rows, columns=COLUMNS):
    """Render rows (dataclasses or dicts) to CSV text with the header comment."""
    buf = io.StringIO()
    for line in header_lines(cfg, kind):
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        d = dataclasses.asdict(r) if dataclasses.is_dataclass(r) else r
        w.writerow([_fmt(d[c]) for c in columns])
    return buf.getvalue()


def write_text(path, text):
    with open(path, "w") as fh:
        fh.write(text)


def read_csv(path):
    """Read a CSV written by :func:`render_csv`, skipping comment lines."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    return list(csv.DictReader(lines))

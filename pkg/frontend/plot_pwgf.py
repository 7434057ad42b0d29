#!/usr/bin/env python3
"""Loss-curve comparison plots for optimizer trace CSVs.

Reads trace files matching a glob, groups them by mode parsed from the
filename pattern ``<preset>_<mode>_seed<k>.csv``, and renders one curve per
mode (mean across seeds) with a shaded +/- 1 standard-deviation band.

Usage:
    plot_pwgf.py --glob 'out/*.csv' --out losses.png [--metric loss|gradnorm] [--logy]

The script consumes only the documented CSV schema
(iter,f_value,grad_norm,event,elapsed_ms) and has no dependency on the
optimizer package.  Output is deterministic: fixed figure size and DPI, no
embedded timestamps.

Exit codes: 0 ok, 1 malformed input file, 2 no files matched.
"""

from __future__ import annotations

import argparse
import csv
import glob as globlib
import re
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

EXPECTED_HEADER = ["iter", "f_value", "grad_norm", "event", "elapsed_ms"]
METRIC_COLUMN = {"loss": "f_value", "gradnorm": "grad_norm"}
MODE_ORDER = ("static", "isotropic", "hessian")
MODE_COLORS = {"static": "#1f77b4", "isotropic": "#ff7f0e", "hessian": "#2ca02c"}
NAME_RE = re.compile(r"^(?P<preset>.+)_(?P<mode>[A-Za-z]+)_seed(?P<seed>\d+)\.csv$")


class SchemaError(Exception):
    pass


def parse_name(path: str):
    """Mode and seed come from the filename, not the file contents."""
    stem = path.replace("\\", "/").rsplit("/", 1)[-1]
    match = NAME_RE.match(stem)
    if match is None:
        raise SchemaError(f"{path}: filename does not match '<preset>_<mode>_seed<k>.csv'")
    return match.group("mode"), int(match.group("seed"))


def read_trace(path: str) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != EXPECTED_HEADER:
        raise SchemaError(f"{path}: expected header {','.join(EXPECTED_HEADER)}")
    try:
        iters = np.array([int(r[0]) for r in rows[1:]])
        f_value = np.array([float(r[1]) for r in rows[1:]])
        grad_norm = np.array([float(r[2]) for r in rows[1:]])
    except (IndexError, ValueError) as exc:
        raise SchemaError(f"{path}: malformed row ({exc})") from exc
    if iters.size == 0:
        raise SchemaError(f"{path}: no data rows")
    return {"iter": iters, "f_value": f_value, "grad_norm": grad_norm}


def collect_traces(pattern: str) -> dict:
    """mode -> list of trace tables, sorted by (mode, seed) for determinism.

    Files whose names do not follow the trace pattern (e.g. the final-state
    ensemble dumps living in the same directory) are skipped, unless nothing
    matches the pattern at all, which is reported as a schema error.
    """
    paths = sorted(globlib.glob(pattern))
    if not paths:
        return {}
    tagged = []
    first_error = None
    for path in paths:
        try:
            mode, seed = parse_name(path)
        except SchemaError as exc:
            first_error = first_error or exc
            continue
        tagged.append((mode, seed, read_trace(path)))
    if not tagged:
        raise first_error
    by_mode: dict = {}
    for mode, seed, trace in sorted(tagged, key=lambda t: (t[0], t[1])):
        by_mode.setdefault(mode, []).append(trace)
    return by_mode


def band_stats(traces: list, column: str):
    """Mean and std across seeds, truncated to the shortest trace."""
    horizon = min(len(t[column]) for t in traces)
    stack = np.stack([t[column][:horizon] for t in traces])
    return np.arange(horizon), stack.mean(axis=0), stack.std(axis=0)


def render(by_mode: dict, out_path: str, metric: str, logy: bool) -> None:
    column = METRIC_COLUMN[metric]
    fig, ax = plt.subplots(figsize=(6.4, 4.2), dpi=120)
    known = [m for m in MODE_ORDER if m in by_mode]
    extra = sorted(m for m in by_mode if m not in MODE_ORDER)
    for mode in known + extra:
        xs, mean, std = band_stats(by_mode[mode], column)
        color = MODE_COLORS.get(mode)
        ax.plot(xs, mean, label=mode, color=color, linewidth=1.5)
        ax.fill_between(xs, mean - std, mean + std, color=color, alpha=0.25, linewidth=0)
    ax.set_xlabel("iteration")
    ax.set_ylabel("objective value" if metric == "loss" else "gradient norm")
    if logy:
        ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_path, metadata={"Software": "plot_pwgf"})
    plt.close(fig)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--glob", required=True, help="pattern matching trace CSV files")
    parser.add_argument("--out", required=True, help="output PNG path")
    parser.add_argument("--metric", choices=sorted(METRIC_COLUMN), default="loss")
    parser.add_argument("--logy", action="store_true", help="logarithmic y axis")
    args = parser.parse_args(argv)

    try:
        by_mode = collect_traces(args.glob)
    except SchemaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not by_mode:
        print(f"error: no files match {args.glob!r}", file=sys.stderr)
        return 2
    render(by_mode, args.out, args.metric, args.logy)
    return 0


if __name__ == "__main__":
    sys.exit(main())

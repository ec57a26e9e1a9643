"""``hdwilks`` command line.

Exit status: 0 on success, 1 for statistical or domain errors (bad ratios,
singular design, failed verification), 2 for I/O and parse errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .errors import HdwError
from .linmodel import Dataset
from .oracle import GRIDS, mc_clt_check, verify_grid
from .rmt import AspectRatios, fisher_lsd_density, rmt_correction
from .rng import DEFAULT_SEED
from .simulate import ConfigError, emit_figure_data, format_table, load_config, run_power_study
from .testkit import METHODS, classical_manova_lrt, manova_clrt, run_tests

EXIT_OK, EXIT_STAT, EXIT_IO = 0, 1, 2


class InputError(Exception):
    """Unreadable or malformed input file."""


# --- CSV input -------------------------------------------------------------------------


def _is_numeric_row(cells) -> bool:
    try:
        [float(c) for c in cells]
    except ValueError:
        return False
    return True


def read_matrix(path: str, header: str = "auto") -> np.ndarray:
    """Numeric CSV with rows as observations; ``header`` is ``auto``, ``yes`` or ``no``."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    if not lines:
        raise InputError(f"{path}: file is empty")
    skip = header == "yes" or (header == "auto" and not _is_numeric_row(lines[0].split(",")))
    rows = lines[1:] if skip else lines
    if not rows:
        raise InputError(f"{path}: no data rows")
    width = None
    data = []
    for i, ln in enumerate(rows, 1 + skip):
        cells = ln.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise InputError(f"{path}:{i}: expected {width} fields, found {len(cells)}")
        try:
            data.append([float(c) for c in cells])
        except ValueError as exc:
            raise InputError(f"{path}:{i}: non-numeric value ({exc})") from exc
    return np.array(data, dtype=float)


# --- output helpers --------------------------------------------------------------------


def _num(x) -> str:
    if x is None:
        return "-"
    if isinstance(x, (int, np.integer)):
        return str(x)
    return f"{x:.6g}"


def _print_reports(reports, out=None):
    out = out or sys.stdout
    first = reports[0]
    d = first.dims
    print(f"dims: p={d.p} n={d.n} q={d.q} q1={d.q1}", file=out)
    for r in reports:
        if r.ratios is not None:
            print(f"ratios: y1={_num(r.ratios[0])} y2={_num(r.ratios[1])}", file=out)
            c = r.corrections
            print(f"corrections: m={_num(c['m'])} v={_num(c['v'])} Ff={_num(c['Ff'])}", file=out)
            break
    head = f"{'method':<12} {'statistic':>12} {'reference':<27} {'df':>5} {'p_value':>12} {'alpha':>6} reject"
    print(head, file=out)
    for r in reports:
        print(
            f"{r.method:<12} {_num(r.statistic):>12} {r.reference:<27} {_num(r.df):>5} "
            f"{_num(r.p_value):>12} {_num(r.alpha):>6} {'yes' if r.reject else 'no'}",
            file=out,
        )


def _write_json(path: str, payload):
    text = json.dumps(payload, indent=2, allow_nan=True) + "\n"
    if path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from exc


def _threads(arg) -> int:
    if arg is not None:
        n = arg
    else:
        env = os.environ.get("HDW_THREADS", "").strip()
        if not env:
            return 1
        try:
            n = int(env)
        except ValueError as exc:
            raise InputError(f"HDW_THREADS={env!r} is not an integer") from exc
    if n < 1:
        raise InputError(f"thread count must be at least 1, got {n}")
    return n


# --- subcommands -----------------------------------------------------------------------


def cmd_test(args) -> int:
    X = read_matrix(args.X, args.header)
    Z = read_matrix(args.Z, args.header)
    data = Dataset(X, Z, args.q1)
    B1 = None if args.b1star == "zero" else read_matrix(args.b1star, args.header)
    methods = METHODS if args.method == "all" else (args.method,)
    reports = list(run_tests(data, B1, methods, args.alpha, args.sigma).values())
    if args.json != "-":
        _print_reports(reports)
    if args.json:
        _write_json(args.json, [r.to_dict() for r in reports])
    return EXIT_OK


def cmd_manova(args) -> int:
    groups = [read_matrix(f, args.header) for f in args.files]
    reports = [manova_clrt(groups, args.alpha)]
    if args.classical:
        reports.append(classical_manova_lrt(groups, args.alpha))
    if args.json != "-":
        _print_reports(reports)
    if args.json:
        _write_json(args.json, [r.to_dict() for r in reports])
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    threads = _threads(args.threads)
    t0 = time.monotonic()

    def progress(done, total):
        if not args.quiet:
            print(f"simulate: {done}/{total} replications ({time.monotonic() - t0:.1f} s)", file=sys.stderr)

    table = run_power_study(cfg, threads=threads, progress=progress)
    text = format_table(table)
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(text)
        except OSError as exc:
            raise InputError(f"cannot write {args.out}: {exc.strerror}") from exc
    else:
        sys.stdout.write(text)
    if args.figure:
        emit_figure_data(table, args.figure)
    for t, msg in table.errors.items():
        print(f"simulate: test {t} failed: {msg}", file=sys.stderr)
    return EXIT_OK


def cmd_lsd(args) -> int:
    y = AspectRatios(args.y1, args.y2)
    if args.at is not None:
        print(f"{fisher_lsd_density(args.at, y):.12g}")
        return EXIT_OK
    c = rmt_correction(y)
    vals = {
        "h": c.support.h, "a": c.support.a, "b": c.support.b,
        "c": c.cd.c, "d": c.cd.d,
        "m": c.mean_m, "v": c.var_v, "F(f)": c.lsd_moment,
    }
    for k, v in vals.items():
        print(f"{k:<5} {v:.12g}")
    return EXIT_OK


def cmd_verify(args) -> int:
    values = GRIDS[args.grid]
    t0 = time.monotonic()
    checks = verify_grid(values, args.quad_tol, args.contour_tol)
    failed = [c for c in checks if not c.passed]
    for c in checks:
        if args.verbose or not c.passed:
            status = "PASS" if c.passed else "FAIL"
            print(
                f"{status} y1={c.y1:<5g} y2={c.y2:<5g} moment={c.moment_err:.2e} "
                f"mean={c.mean_err:.2e} var={c.var_err:.2e} {c.message}".rstrip()
            )
    worst = [max((getattr(c, k) for c in checks if not math.isnan(getattr(c, k))), default=float("nan"))
             for k in ("moment_err", "mean_err", "var_err")]
    print(
        f"verify: {args.grid} grid, {len(checks) - len(failed)}/{len(checks)} points passed in "
        f"{time.monotonic() - t0:.1f} s; worst moment {worst[0]:.2e} (tol {args.quad_tol:g}), "
        f"mean {worst[1]:.2e}, variance {worst[2]:.2e} (tol {args.contour_tol:g})"
    )
    ok = not failed
    if args.mc_reps:
        s = mc_clt_check(100, 200, 400, args.mc_reps, seed=args.seed, threads=_threads(args.threads))
        mc_ok = (not s.insufficient_reps and s.mean_err_in_se < 3.0
                 and 0.85 <= s.var_ratio <= 1.15 and s.ks_distance < 0.05)
        print(
            f"{'PASS' if mc_ok else 'FAIL'} clt (p,q1,n-q)=(100,200,400) reps={s.reps} seed={s.seed}: "
            f"mean off by {s.mean_err_in_se:.2f} SE, variance ratio {s.var_ratio:.3f}, KS {s.ks_distance:.4f}"
        )
        ok = ok and mc_ok
    return EXIT_OK if ok else EXIT_STAT


# --- parser ----------------------------------------------------------------------------


def _prob(text: str) -> float:
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"{text} is not in (0, 1)")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hdwilks", description="Corrected LRTs for high-dimensional regression.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    def io_flags(p):
        p.add_argument("--header", choices=("auto", "yes", "no"), default="auto",
                       help="whether CSV files start with a header row (default: detect)")
        p.add_argument("--json", metavar="PATH", help="also write reports as JSON ('-' for stdout only)")
        p.add_argument("--alpha", type=_prob, default=0.05)

    p = sub.add_parser("test", help="test B1 = B1* on a dataset")
    p.add_argument("X", help="responses, n x p CSV")
    p.add_argument("Z", help="regressors, n x q CSV; the first q1 columns are tested")
    p.add_argument("--q1", type=int, required=True)
    p.add_argument("--b1star", default="zero", help="p x q1 CSV of hypothesised coefficients, or 'zero'")
    p.add_argument("--method", choices=METHODS + ("all",), default="clrt")
    p.add_argument("--sigma", choices=("plugin", "debiased"), default="plugin",
                   help="how ST1/ST2 estimate tr(Sigma) and tr(Sigma^2)")
    io_flags(p)
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("manova", help="equality of group mean vectors, one CSV per group")
    p.add_argument("files", nargs="+")
    p.add_argument("--classical", action="store_true", help="also report the chi-square LRT")
    io_flags(p)
    p.set_defaults(func=cmd_manova)

    p = sub.add_parser("simulate", help="size/power study from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--figure", help="also write long-format plot data here")
    p.add_argument("--threads", type=int, help="worker threads (default: $HDW_THREADS or 1)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--quiet", action="store_true", help="no progress on stderr")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("lsd", help="Fisher LSD density and CLRT corrections")
    p.add_argument("--y1", type=float, required=True)
    p.add_argument("--y2", type=float, required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--at", type=float, help="evaluate the density at this point")
    g.add_argument("--moments", action="store_true", help="print h, a, b, c, d, m, v, F(f) (default)")
    p.set_defaults(func=cmd_lsd)

    p = sub.add_parser("verify", help="check closed forms against numerical oracles")
    p.add_argument("--grid", choices=tuple(GRIDS), default="coarse")
    p.add_argument("--quad-tol", type=float, default=1e-6)
    p.add_argument("--contour-tol", type=float, default=1e-5)
    p.add_argument("--mc-reps", type=int, default=0, help="also run the Monte Carlo CLT check with this many reps")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--threads", type=int)
    p.add_argument("-v", "--verbose", action="store_true", help="print every grid point")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ConfigError, OSError) as exc:
        print(f"hdwilks: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (HdwError, ValueError) as exc:
        print(f"hdwilks: error: {exc}", file=sys.stderr)
        return EXIT_STAT


if __name__ == "__main__":
    sys.exit(main())

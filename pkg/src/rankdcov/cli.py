"""
Command-line front end.

Subcommands::

    rankdcov test            run one or all tests on CSV data
    rankdcov critical-values tabulate asymptotic critical values
    rankdcov simulate        size/power tables for the simulation designs
    rankdcov bench           assignment solver timings

Exit codes: 0 success (whatever the test decision), 2 input error,
3 computation error.  JSON output carries ``schema_version``.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import __version__, nulldist, testkit
from .assignment import lsap_gabow_tarjan, lsap_hungarian

SCHEMA_VERSION = "1"
EXIT_OK = 0
EXIT_INPUT = 2
EXIT_COMPUTE = 3


class InputError(Exception):
    """Bad user input; mapped to exit code 2."""


# --------------------------------------------------------------------------
# CSV ingestion


@dataclass(frozen=True)
class InputSpec:
    """Where the paired sample comes from.

    Either one file whose first ``px`` columns are ``X``, or two files with
    ``X`` and ``Y`` and equal row counts.
    """

    paths: tuple[str, ...]
    has_header: bool = False
    px: int | None = None
    delimiter: str = ","

    def __post_init__(self):
        if len(self.paths) not in (1, 2):
            raise InputError(f"expected one or two input files, got {len(self.paths)}")
        if len(self.paths) == 1 and self.px is None:
            raise InputError("single-file input needs --px (number of X columns)")
        if self.px is not None and self.px < 1:
            raise InputError(f"--px must be >= 1, got {self.px}")


def read_matrix(path: str, has_header: bool = False, delimiter: str = ",") -> np.ndarray:
    """Parse a numeric CSV file into a 2-D float array.

    Numbers use ``.`` as decimal mark; scientific notation is accepted.
    Errors name the line (and column for non-finite cells).
    """
    p = Path(path)
    if not p.is_file():
        raise InputError(f"input file not found: {path}")
    rows: list[list[float]] = []
    width = None
    with open(p, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh, delimiter=delimiter), start=1):
            if has_header and lineno == 1:
                continue
            if not row or all(not c.strip() for c in row):
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise InputError(f"{path}: line {lineno} has {len(row)} fields, expected {width}")
            vals = []
            for col, cell in enumerate(row, start=1):
                try:
                    v = float(cell.strip())
                except ValueError:
                    raise InputError(f"{path}: line {lineno}, column {col}: not a number: {cell!r}") from None
                if not math.isfinite(v):
                    raise InputError(f"{path}: non-finite value at (row {lineno}, column {col})")
                vals.append(v)
            rows.append(vals)
    if not rows:
        raise InputError(f"{path}: no data rows")
    return np.asarray(rows, dtype=float)


def load_sample(spec: InputSpec) -> tuple[np.ndarray, np.ndarray]:
    if len(spec.paths) == 1:
        m = read_matrix(spec.paths[0], spec.has_header, spec.delimiter)
        if not spec.px < m.shape[1]:
            raise InputError(f"--px={spec.px} must be smaller than the column count {m.shape[1]}")
        return m[:, : spec.px], m[:, spec.px:]
    x = read_matrix(spec.paths[0], spec.has_header, spec.delimiter)
    y = read_matrix(spec.paths[1], spec.has_header, spec.delimiter)
    if x.shape[0] != y.shape[0]:
        raise InputError(f"row counts differ: {spec.paths[0]} has {x.shape[0]}, {spec.paths[1]} has {y.shape[0]}")
    return x, y


# --------------------------------------------------------------------------
# helpers


def _method_name(s: str) -> str:
    return s.replace("-", "_")


def _int_list(text: str) -> list[int]:
    """``"1,3,5"`` or ``"1-3"`` or a mix of both."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            lo, hi = part.split("-", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty list: {text!r}")
    return out


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a list of numbers: {text!r}") from None


def _emit(text: str, output: str | None) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def _pretty_report(r: testkit.TestReport) -> str:
    pv = "n/a" if r.p_value is None else f"{r.p_value:.4g}"
    lines = [
        f"method     {r.method}",
        f"n, p, q    {r.n}, {r.p}, {r.q}",
        f"statistic  {r.statistic:.6g}",
        f"threshold  {r.threshold:.6g}  (alpha={r.alpha})",
        f"p-value    {pv}",
        f"decision   {'reject independence' if r.reject else 'do not reject'}",
    ]
    if r.metadata.get("asymptotic_caveat"):
        lines.append("note       n < 100: the asymptotic p-value may be inaccurate")
    return "\n".join(lines)


# --------------------------------------------------------------------------
# subcommands


def cmd_test(args) -> int:
    spec = InputSpec(tuple(args.inputs), args.header, args.px, args.delimiter)
    x, y = load_sample(spec)
    if x.shape[0] < testkit.MIN_N:
        raise InputError(f"need at least {testkit.MIN_N} rows, got {x.shape[0]}")
    method = _method_name(args.method)
    try:
        cfg = testkit.TestConfig(
            method="hallin_theoretical" if method == "all" else method,
            alpha=args.alpha,
            permutations=args.permutations,
            mc_reps=args.mc_reps,
            seed=args.seed,
            solver=args.solver,
            scale=args.scale,
            grid_seed=args.grid_seed,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    methods = testkit.METHODS if method == "all" else (method,)
    reports = [testkit.run_test(x, y, replace(cfg, method=m)) for m in methods]
    if args.format == "pretty":
        _emit("\n\n".join(_pretty_report(r) for r in reports), args.output)
    else:
        docs = [dict(schema_version=SCHEMA_VERSION, **r.to_dict()) for r in reports]
        _emit(json.dumps(docs if method == "all" else docs[0], indent=2), args.output)
    return EXIT_OK


def cmd_critical_values(args) -> int:
    for a in args.alpha:
        if not 0 < a < 1:
            raise InputError(f"alpha must lie in (0, 1), got {a}")
    for d in args.p + args.q:
        if d < 1:
            raise InputError(f"dimensions must be >= 1, got {d}")
    cache = False if args.no_cache else None
    t0 = time.perf_counter()
    solves0 = nulldist.spectral_solves
    published = nulldist.published_critical_values()
    rows = []
    for a in args.alpha:
        for p in args.p:
            for q in args.q:
                v = nulldist.critical_value(p, q, a, args.M_R, args.M_S, args.K, cache=cache)
                ref = published.get((a, p, q))
                rows.append(dict(alpha=a, p=p, q=q, value=v, published=ref))
    doc: dict = dict(
        schema_version=SCHEMA_VERSION,
        M_R=args.M_R or "auto",
        M_S=args.M_S or "auto",
        K=args.K,
        rows=rows,
        spectral_solves=nulldist.spectral_solves - solves0,
        wall_time=time.perf_counter() - t0,
    )
    if args.verify_paper:
        devs = [abs(r["value"] - r["published"]) for r in rows if r["published"] is not None]
        if not devs:
            raise InputError("no requested entry is covered by the published table (p, q <= 10, alpha in 0.1/0.05/0.01)")
        doc["max_abs_deviation"] = max(devs)
        doc["published_accuracy"] = nulldist.PUBLISHED_ACCURACY
        doc["compared"] = len(devs)

    if args.format == "json":
        _emit(json.dumps(doc, indent=2), args.output)
    elif args.format == "csv":
        lines = ["alpha,p,q,value,published"]
        lines += [f"{r['alpha']},{r['p']},{r['q']},{r['value']:.6f},{'' if r['published'] is None else r['published']}"
                  for r in rows]
        _emit("\n".join(lines) + "\n", args.output)
    else:
        out = []
        for a in args.alpha:
            out.append(f"alpha = {a}")
            out.append("p\\q " + "".join(f"{q:>9d}" for q in args.q))
            for p in args.p:
                vals = [r["value"] for r in rows if r["alpha"] == a and r["p"] == p]
                out.append(f"{p:<4d}" + "".join(f"{v:9.4f}" for v in vals))
            out.append("")
        if args.verify_paper:
            out.append(f"max |computed - published| = {doc['max_abs_deviation']:.4f} over {doc['compared']} "
                       f"entries (published accuracy {nulldist.PUBLISHED_ACCURACY})")
        _emit("\n".join(out), args.output)
    return EXIT_OK


_EXAMPLES = {
    "1a": ("1", 0.0), "1b": ("1", 0.5), "1c": ("1", 0.9),
    "2a": ("2", 0.0), "2b": ("2", 0.5), "2c": ("2", 0.9),
}


def cmd_simulate(args) -> int:
    if args.example not in _EXAMPLES:
        raise InputError(f"unknown example {args.example!r}; choose from {sorted(_EXAMPLES)}")
    example, tau = _EXAMPLES[args.example]
    if args.tau is not None:
        tau = args.tau
    methods = [_method_name(m) for m in args.methods.split(",")]
    if methods == ["all"]:
        methods = list(testkit.METHODS)
    try:
        base = testkit.TestConfig(permutations=args.permutations, mc_reps=args.mc_reps, solver=args.solver)
        table = testkit.simulate(
            example, tau=tau, rhos=args.rho, p=args.p, q=args.q, n=args.n, reps=args.reps,
            methods=methods, alpha=args.alpha, seed=args.seed, workers=args.threads, base_config=base,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    if args.format == "json":
        doc = json.loads(table.to_json())
        doc["schema_version"] = SCHEMA_VERSION
        _emit(json.dumps(doc, indent=2), args.output)
    else:
        _emit(table.to_csv(), args.output)
    return EXIT_OK


def geometric_instance(n: int, d: int, rng, side: int = 1000) -> np.ndarray:
    """Squared distances between two sets of random integer points in ``[0, side]^d``."""
    a = rng.integers(0, side + 1, size=(n, d))
    b = rng.integers(0, side + 1, size=(n, d))
    diff = a[:, None, :] - b[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff).astype(np.int64)


def cmd_bench(args) -> int:
    solvers = ["hungarian", "gabow_tarjan"] if args.solver == "both" else [args.solver]
    fns = {"hungarian": lsap_hungarian, "gabow_tarjan": lsap_gabow_tarjan}
    rng = np.random.default_rng(args.seed)
    # compile outside the timed region
    warm = geometric_instance(8, args.d, np.random.default_rng(0))
    for s in solvers:
        fns[s](warm)
    rows = []
    for n in args.n:
        if n < 1:
            raise InputError(f"n must be >= 1, got {n}")
        costs = geometric_instance(n, args.d, rng)
        row: dict = {"n": n}
        totals = {}
        for s in solvers:
            t0 = time.perf_counter()
            res = fns[s](costs)
            row[f"{s}_seconds"] = time.perf_counter() - t0
            totals[s] = res.total_cost
        if len(set(totals.values())) > 1:
            raise RuntimeError(f"solvers disagree at n={n}: {totals}")
        if args.full_test:
            x, y = testkit.sample_example1(n, args.d, args.d, 0.0, 0.0, rng)
            t0 = time.perf_counter()
            testkit.run_test(x, y, testkit.TestConfig(method="hallin_theoretical"))
            row["test_seconds"] = time.perf_counter() - t0
        rows.append(row)
    doc: dict = dict(schema_version=SCHEMA_VERSION, d=args.d, seed=args.seed, rows=rows)
    if len(rows) >= 2:
        logn = np.log([r["n"] for r in rows])
        doc["loglog_slopes"] = {
            s: float(np.polyfit(logn, np.log([r[f"{s}_seconds"] for r in rows]), 1)[0]) for s in solvers
        }
    if len(solvers) == 2:
        last = rows[-1]
        doc["gabow_tarjan_faster_at_max_n"] = bool(last["gabow_tarjan_seconds"] < last["hungarian_seconds"])
    if args.format == "json":
        _emit(json.dumps(doc, indent=2), args.output)
    else:
        cols = ["n"] + [k for k in rows[0] if k != "n"]
        lines = ["  ".join(f"{c:>20s}" for c in cols)]
        for r in rows:
            lines.append("  ".join(f"{r[c]:>20.4g}" if c != "n" else f"{r[c]:>20d}" for c in cols))
        for s, v in doc.get("loglog_slopes", {}).items():
            lines.append(f"log-log slope {s}: {v:.2f}")
        if "gabow_tarjan_faster_at_max_n" in doc:
            verdict = "faster" if doc["gabow_tarjan_faster_at_max_n"] else "NOT faster"
            lines.append(f"gabow_tarjan is {verdict} than hungarian at n={rows[-1]['n']}")
        _emit("\n".join(lines), args.output)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="rankdcov",
        description="Distribution-free independence tests with center-outward ranks and signs.",
    )
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--cache", help="critical value cache file (default: $%s or ~/.cache/rankdcov)" % nulldist.CACHE_ENV)
    sub = ap.add_subparsers(dest="command", required=True)

    method_choices = [m.replace("_", "-") for m in testkit.METHODS] + ["all"]

    t = sub.add_parser("test", help="test independence of X and Y read from CSV")
    t.add_argument("inputs", nargs="+", help="one CSV (with --px) or two CSVs holding X and Y")
    t.add_argument("--px", type=int, help="number of X columns in single-file mode")
    t.add_argument("--header", action="store_true", help="skip the first line")
    t.add_argument("--delimiter", default=",")
    t.add_argument("--method", default="hallin-theoretical", choices=method_choices)
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--permutations", type=int, help="permutation count R (default n)")
    t.add_argument("--mc-reps", type=int, default=1000)
    t.add_argument("--solver", default="hungarian", choices=["hungarian", "gabow_tarjan"])
    t.add_argument("--scale", type=int, default=testkit.DEFAULT_SCALE, help="cost quantization for gabow_tarjan")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--grid-seed", type=int, default=0)
    t.add_argument("--format", choices=["json", "pretty"], default="json")
    t.add_argument("--output", "-o")
    t.set_defaults(func=cmd_test)

    c = sub.add_parser("critical-values", help="tabulate Q_{1-alpha} of the limiting null law")
    c.add_argument("--p", type=_int_list, default=[1, 2, 3], help="e.g. 1-3 or 1,2,5")
    c.add_argument("--q", type=_int_list, default=[1, 2, 3])
    c.add_argument("--alpha", type=_float_list, default=[0.1, 0.05, 0.01])
    c.add_argument("--M-R", dest="M_R", type=int, help="radii of the spectrum grid (default by dimension)")
    c.add_argument("--M-S", dest="M_S", type=int, help="directions of the spectrum grid (default by dimension)")
    c.add_argument("--K", type=int, default=nulldist.DEFAULT_K, help="number of product weights kept")
    c.add_argument("--no-cache", action="store_true", help="neither read nor write the cache")
    c.add_argument("--verify-paper", action="store_true",
                   help="compare with the published table and report the max absolute deviation")
    c.add_argument("--format", choices=["table", "csv", "json"], default="table")
    c.add_argument("--output", "-o")
    c.set_defaults(func=cmd_critical_values)

    s = sub.add_parser("simulate", help="size/power table for a simulation design")
    s.add_argument("--example", default="1a", help="1a/1b/1c Gaussian, 2a/2b/2c Cauchy margins")
    s.add_argument("--tau", type=float, help="override the design's tau")
    s.add_argument("--rho", type=_float_list, default=[0.0])
    s.add_argument("--p", type=int, default=2)
    s.add_argument("--q", type=int, default=2)
    s.add_argument("--n", type=int, default=216)
    s.add_argument("--reps", type=int, default=100)
    s.add_argument("--methods", default="hallin-theoretical", help="comma list or 'all'")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--permutations", type=int)
    s.add_argument("--mc-reps", type=int, default=1000)
    s.add_argument("--solver", default="hungarian", choices=["hungarian", "gabow_tarjan"])
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--threads", type=int, default=1, help="worker threads for replicates")
    s.add_argument("--format", choices=["csv", "json"], default="csv")
    s.add_argument("--output", "-o")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bench", help="time the assignment solvers")
    b.add_argument("--solver", default="both", choices=["hungarian", "gabow_tarjan", "both"])
    b.add_argument("--n", type=_int_list, default=[250, 500, 1000])
    b.add_argument("--d", type=int, default=2)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--full-test", action="store_true", help="also time a complete hallin_theoretical test")
    b.add_argument("--format", choices=["table", "json"], default="table")
    b.add_argument("--output", "-o")
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INPUT
    if args.cache:
        os.environ[nulldist.CACHE_ENV] = args.cache
    try:
        return args.func(args)
    except InputError as exc:
        print(f"rankdcov: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001 - report and map to the compute exit code
        print(f"rankdcov: computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())

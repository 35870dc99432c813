"""``covbound`` command line: bound, plan, verify, oracle.

Exit codes: 0 success, 2 usage or input error, 3 a mathematical check
failed (a VIOLATED Monte Carlo verdict or a failed oracle certificate).
"""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import sys

import numpy as np

from . import bounds as bd
from . import isserlis as iss
from .errors import CovboundError, SizeLimitError
from .montecarlo import DEFAULT_THETAS, TrialConfig, Verdict, default_workers, exceedance
from .spectra import CovarianceMatrix, Spectrum, random_psd, read_matrix_file, spectrum_of

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CHECK_FAILED = 3


class UsageError(CovboundError):
    pass


# -- helpers ----------------------------------------------------------------


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from exc


def parse_range(text: str) -> list[int]:
    """``"2..5"`` -> [2, 3, 4, 5]; a single integer is also accepted."""
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            values = list(range(int(lo), int(hi) + 1))
        else:
            values = [int(text)]
    except ValueError as exc:
        raise UsageError(f"bad range {text!r}; use LO..HI") from exc
    if not values:
        raise UsageError(f"empty range {text!r}")
    return values


def _load(args) -> CovarianceMatrix | Spectrum:
    if args.matrix:
        return read_matrix_file(args.matrix)
    return Spectrum.from_eigenvalues(_floats(args.spectrum))


def _spectrum(args) -> Spectrum:
    src = _load(args)
    return src if isinstance(src, Spectrum) else spectrum_of(src)


def _matrix(args) -> CovarianceMatrix:
    src = _load(args)
    return src if isinstance(src, CovarianceMatrix) else CovarianceMatrix.diag(src.eigenvalues)


def _equations(args) -> list[bd.Equation]:
    if not args.equations:
        return list(bd.Equation)
    return [bd.Equation.parse(e) for e in args.equations.split(",") if e.strip()]


def _theta_for(args, eq: bd.Equation, d: int, ell: int) -> float:
    if args.delta is not None:
        return bd.theta_for_confidence(args.delta, bd.multiplicity(eq, d, ell))
    return args.theta


def _fmt(value) -> str:
    if isinstance(value, bool) or value is None:
        return str(value)
    if isinstance(value, float):
        return f"{value:.9g}"
    if isinstance(value, (list, tuple)):
        return json.dumps(value, separators=(",", ":"))
    return str(value)


def render(rows: list[dict], fmt: str, out) -> None:
    if fmt == "json":
        json.dump(rows, out, indent=2)
        out.write("\n")
        return
    if fmt == "csv":
        columns = list(dict.fromkeys(k for row in rows for k in row))
        writer = csv.DictWriter(out, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: json.dumps(v) if isinstance(v, (list, dict)) else v for k, v in row.items()})
        return
    # heterogeneous rows (oracle output) get one table per run of equal key sets
    for i, (_, group) in enumerate(itertools.groupby(rows, key=lambda r: tuple(r))):
        if i:
            out.write("\n")
        _table(list(group), out)


def _table(rows: list[dict], out) -> None:
    columns = list(rows[0])
    cells = [[_fmt(row[c]) for c in columns] for row in rows]
    widths = [max(len(c), *(len(r[i]) for r in cells)) for i, c in enumerate(columns)]
    out.write("  ".join(c.ljust(w) for c, w in zip(columns, widths)).rstrip() + "\n")
    for r in cells:
        out.write("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip() + "\n")


# -- subcommands ------------------------------------------------------------


def cmd_bound(args, out) -> int:
    sp = _spectrum(args)
    rows = []
    for eq in _equations(args):
        ell = args.ell if eq in bd.PER_EIGENVALUE else 1
        theta = _theta_for(args, eq, sp.d, ell)
        rows.append(bd.bound(eq, sp, args.n, theta, ell).to_dict())
    render(rows, args.format, out)
    return EXIT_OK


def cmd_plan(args, out) -> int:
    sp = _spectrum(args)
    rows = []
    status = EXIT_OK
    for eq in _equations(args):
        ell = args.ell if eq in bd.PER_EIGENVALUE else 1
        theta = _theta_for(args, eq, sp.d, ell)
        n = bd.plan_n(eq, sp, args.eps_rel, theta, ell)
        at_n = bd.bound(eq, sp, n, theta, ell).deviation
        before = bd.bound(eq, sp, n - 1, theta, ell).deviation if n > 1 else None
        minimal = at_n <= args.eps_rel and (before is None or before > args.eps_rel)
        if not minimal:
            status = EXIT_CHECK_FAILED
        rows.append({
            "equation": eq.value,
            "ell": ell,
            "theta": theta,
            "eps_rel": args.eps_rel,
            "n": n,
            "deviation_at_n": at_n,
            "deviation_at_n_minus_1": before,
            "minimal": minimal,
        })
    render(rows, args.format, out)
    return status


def cmd_verify(args, out) -> int:
    cfg = TrialConfig(
        C=_matrix(args),
        n=args.n,
        trials=args.trials,
        thetas=tuple(_floats(args.theta)) if args.theta else DEFAULT_THETAS,
        seed=args.seed,
        equations=tuple(_equations(args)),
        workers=default_workers(),
    )
    reports = exceedance(cfg)
    render([r.to_dict() for r in reports], args.format, out)
    violated = any(r.verdict is Verdict.VIOLATED for r in reports)
    return EXIT_CHECK_FAILED if violated else EXIT_OK


def oracle_checks(ps: list[int], C: CovarianceMatrix) -> list[dict]:
    rows: list[dict] = []
    for name, got, want in iss.closed_form_checks():
        rows.append({"check": "closed_form", "name": name, "terms": got.to_json(), "pass": got == want})
    for p in ps:
        if p < 2:
            continue
        for k in range(p + 1):
            formula = iss.term_counts(p, k)
            row = {"check": "term_counts", "p": p, "k": k, "total": formula[0], "singleton": formula[1]}
            if p <= 6:
                row["pass"] = iss.enumerate_term_counts(p, k) == formula
            else:
                row["pass"] = None
            rows.append(row)
    d = C.d
    for p in ps:
        worst, skipped = 0.0, 0
        for letters in itertools.product("XC", repeat=p):
            word = "".join(letters)
            try:
                num = iss.numeric_word_moment(word, C)
            except SizeLimitError:
                skipped += 1
                continue
            sym = iss.evaluate_symbolic(iss.symbolic_word_moment(word), C)
            rel = np.linalg.norm(sym - num) / max(np.linalg.norm(num), 1e-300)
            worst = max(worst, float(rel))
        rows.append({
            "check": "symbolic_vs_numeric",
            "p": p,
            "d": d,
            "max_rel_error": worst,
            "skipped_words": skipped,
            "pass": worst <= 1e-9,
        })
    for p in ps:
        if p < 2:
            continue
        for kind in iss.MomentKind:
            cert = iss.verify_bernstein(p, C, kind)
            rows.append({"check": "bernstein", **cert.to_dict()})
    return rows


def cmd_oracle(args, out) -> int:
    ps = parse_range(args.p)
    if min(ps) < 1 or max(ps) > iss.MAX_WORD_LENGTH:
        raise UsageError(f"--p must lie within 1..{iss.MAX_WORD_LENGTH}")
    if args.matrix or args.spectrum:
        C = _matrix(args)
    else:
        if args.dim < 1:
            raise UsageError("--dim must be >= 1")
        C = random_psd(args.dim, np.random.default_rng(args.seed))
    rows = oracle_checks(ps, C)
    render(rows, args.format, out)
    return EXIT_OK if all(r["pass"] is not False for r in rows) else EXIT_CHECK_FAILED


# -- argument parsing -------------------------------------------------------


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _source(p: argparse.ArgumentParser, required: bool = True) -> None:
    g = p.add_mutually_exclusive_group(required=required)
    g.add_argument("--matrix", metavar="PATH", help="CSV or JSON matrix file, or JSON spectrum")
    g.add_argument("--spectrum", metavar="L1,L2,...", help="eigenvalues of C")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("json", "csv", "table"), default="table")
    p.add_argument("--equations", metavar="eq15,...,eq20", help="subset of equations")


def _theta_or_delta(p: argparse.ArgumentParser) -> None:
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--theta", type=float, help="tail exponent theta >= 0")
    g.add_argument("--delta", type=float, help="failure probability; theta = ln(m / delta)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="covbound", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="evaluate tail bounds")
    _source(p)
    _common(p)
    _theta_or_delta(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--ell", type=int, default=1, help="eigenvalue index for eq18-eq20")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("plan", help="minimal sample size for a target deviation")
    _source(p)
    _common(p)
    _theta_or_delta(p)
    p.add_argument("--eps-rel", type=float, required=True)
    p.add_argument("--ell", type=int, default=1)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("verify", help="Monte Carlo audit of the bounds")
    _source(p)
    _common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--seed", type=_seed, default=0)
    p.add_argument("--theta", help="comma-separated theta grid (default 0.5,1,2,3,5)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("oracle", help="Isserlis moment oracle and Bernstein certificates")
    _source(p, required=False)
    p.add_argument("--format", choices=("json", "csv", "table"), default="table")
    p.add_argument("--p", default="2..5", help="moment orders, LO..HI within 1..8")
    p.add_argument("--dim", type=int, default=2, help="dimension of the random test matrix")
    p.add_argument("--seed", type=_seed, default=0)
    p.set_defaults(func=cmd_oracle)
    return parser


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        buf = io.StringIO()
        code = args.func(args, buf)
    except CovboundError as exc:
        print(f"covbound: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out.write(buf.getvalue())
    return code


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 convergence criterion fails,
3 iteration did not converge.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from fractions import Fraction

from . import majorant, riccati
from .exceptions import InsufficientData, MaxIterations, SingularSchur
from .solver import estimate_order

EXIT_OK, EXIT_USAGE, EXIT_CRITERION, EXIT_NONCONVERGENCE = 0, 1, 2, 3

#: the six benchmark (alpha, c) pairs
TABLE_PAIRS = (
    (Fraction(1, 2), Fraction(1, 3)),
    (Fraction(1, 2), Fraction(2, 9)),
    (Fraction(1, 2), Fraction(1, 9)),
    (Fraction(1, 4), Fraction(2, 5)),
    (Fraction(1, 4), Fraction(1, 3)),
    (Fraction(1, 4), Fraction(1, 10)),
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _number(text):
    """Decimal or ``p/q`` rational."""
    try:
        return Fraction(text.strip())
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")


def _fmt(x):
    return f"{x:.10e}"


def _build_model(args):
    if args.model == "constant":
        if args.L is None:
            raise UsageError("--model constant needs --L")
        value, name = args.L, "L"
    elif args.model == "gamma":
        if args.gamma is None:
            raise UsageError("--model gamma needs --gamma")
        value, name = args.gamma, "gamma"
    else:
        value, name = 1.0, "gamma"
    if not value > 0:
        raise UsageError(f"--{name} must be positive")
    return majorant.ConstantL(value) if args.model == "constant" else majorant.GammaType(value)


def _beta(args):
    if not args.beta > 0:
        raise UsageError("--beta must be positive")
    return args.beta


def _emit(doc, fmt, out):
    if fmt == "json":
        out.write(json.dumps(doc, indent=2) + "\n")
    else:
        for key, value in doc.items():
            out.write(f"{key} = {value}\n")


def cmd_certify(args, out):
    cert = majorant.certify(_beta(args), _build_model(args))
    _emit(cert.to_dict(), args.format, out)
    return EXIT_OK if cert.criterion_holds else EXIT_CRITERION


def cmd_majorize(args, out):
    cert = majorant.certify(_beta(args), _build_model(args))
    if not cert.criterion_holds:
        print(f"criterion fails: beta={cert.beta} > b={cert.b}", file=sys.stderr)
        return EXIT_CRITERION
    trace = majorant.majorizing_sequence(cert, max_k=args.k, tol=args.tol)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["k", "t_k", "s_k"])
    for k, (t, s) in enumerate(trace.pairs()):
        writer.writerow([k, _fmt(t), _fmt(s)])
    return EXIT_OK


def _params(alpha, c, n):
    try:
        return riccati.TransportParameters(alpha, c, n)
    except ValueError as exc:
        raise UsageError(str(exc))


def cmd_solve_riccati(args, out):
    p = _params(args.alpha, args.c, args.n)
    try:
        sol = riccati.solve_minimal(p, max_iter=args.max_iter, plain_newton=args.plain_newton)
    except (MaxIterations, SingularSchur) as exc:
        print(f"solve-riccati: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGENCE
    if args.dump_x:
        riccati.write_matrix_csv(sol.X, args.dump_x)
    _emit(sol.to_dict(), args.format, out)
    return EXIT_OK


def _atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _label(x):
    return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)


def cmd_bench(args, out):
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"bad --sizes {args.sizes!r}")
    if not sizes:
        raise UsageError("--sizes is empty")
    for n in sizes:
        _params(Fraction(0), Fraction(1), n)
    os.makedirs(args.out, exist_ok=True)

    status = EXIT_OK
    for n in sizes:
        table = io.StringIO()
        writer = csv.writer(table, lineterminator="\n")
        writer.writerow(["alpha", "c", "L_beta", "iter", "res", "cpu_time"])
        for alpha, c in TABLE_PAIRS:
            p = riccati.TransportParameters(alpha, c, n)
            try:
                sol = riccati.solve_minimal(p)
            except (MaxIterations, SingularSchur) as exc:
                print(f"bench: n={n} alpha={alpha} c={c}: {exc}", file=sys.stderr)
                status = EXIT_NONCONVERGENCE
                continue
            writer.writerow([
                _label(alpha), _label(c), _label(p.L_beta),
                sol.iterations, _fmt(sol.res_history[-1]), _fmt(sol.wall_time_s),
            ])
            hist = io.StringIO()
            hw = csv.writer(hist, lineterminator="\n")
            hw.writerow(["k", "res"])
            for k, r in enumerate(sol.res_history):
                hw.writerow([k, _fmt(r)])
            tag = f"n{n}_a{alpha.numerator}-{alpha.denominator}_c{c.numerator}-{c.denominator}"
            _atomic_write(os.path.join(args.out, f"history_{tag}.csv"), hist.getvalue())
            out.write(
                f"n={n:5d} (alpha, c)=({_label(alpha)}, {_label(c)}) L*beta={_label(p.L_beta)} "
                f"iter={sol.iterations} Res={sol.res_history[-1]:.4e} time={sol.wall_time_s:.3f}s\n"
            )
        _atomic_write(os.path.join(args.out, f"table_n{n}.csv"), table.getvalue())
    return status


def cmd_order(args, out):
    try:
        errors = [float(x) for x in args.errors.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad --errors {args.errors!r}")
    try:
        value = estimate_order(errors)
    except InsufficientData as exc:
        raise UsageError(str(exc))
    out.write(f"{value!r}\n")
    return EXIT_OK


def _model_flags(p):
    p.add_argument("--model", choices=("constant", "gamma", "selfconcordant"), required=True)
    p.add_argument("--L", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--beta", type=float, required=True)


def build_parser():
    parser = _Parser(prog="twostep", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("certify", help="semilocal convergence certificate")
    _model_flags(p)
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("majorize", help="scalar majorizing sequence as CSV")
    _model_flags(p)
    p.add_argument("--k", type=int, default=100, help="maximum number of steps")
    p.add_argument("--tol", type=float, default=1e-15)
    p.set_defaults(func=cmd_majorize)

    p = sub.add_parser("solve-riccati", help="minimal positive solution of the transport NSARE")
    p.add_argument("--alpha", type=_number, required=True)
    p.add_argument("--c", type=_number, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--plain-newton", action="store_true", help="skip the correction half-step")
    p.add_argument("--dump-x", metavar="PATH", help="write X as CSV")
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.set_defaults(func=cmd_solve_riccati)

    p = sub.add_parser("bench", help="reproduce the iteration/residual tables")
    p.add_argument("--sizes", default="1024,2048,4096")
    p.add_argument("--out", required=True, metavar="DIR")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("order", help="empirical convergence order")
    p.add_argument("--errors", required=True, help="comma separated, decreasing")
    p.set_defaults(func=cmd_order)
    return parser


def main(argv=None, out=None):
    out = out or sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args, out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"twostep {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

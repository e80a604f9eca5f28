"""Command line entry point ``orlicz-unfold``.

Exit codes: 0 success, 1 usage or input error, 2 study assertion failure,
3 I/O error. Numbers are printed in shortest round-trip form (at most 17
significant digits), so output reads back to the same doubles.
"""

import argparse
import csv
import sys
from pathlib import Path


from ._validation import ParseError
from .cells import Grid, decompose, parse_cell, parse_domain
from .expr import parse_expression
from .modular import DEFAULT_REL_TOL, SampledFunction, luxemburg_norm
from .nfunc import from_spec
from .study import emit_report, load_config, run_study
from .unfold import unfold

EXIT_OK, EXIT_USAGE, EXIT_ASSERT, EXIT_IO = 0, 1, 2, 3


def _fmt(x):
    # shortest repr that round-trips; never more than 17 significant digits
    return repr(float(x))


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _parse_h(text):
    vals = tuple(float(v) for v in text.split(","))
    return vals[0] if len(vals) == 1 else vals


def read_function_csv(path):
    """Read ``# h=<spacing> boxes=<domain-spec>`` followed by one value per line."""
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ParseError(f"{path}: first line must be '# h=<spacing> boxes=<domain-spec>'")
        fields = dict(part.split("=", 1) for part in header[1:].split() if "=" in part)
        if "h" not in fields or "boxes" not in fields:
            raise ParseError(f"{path}: header needs h= and boxes=")
        values = [float(line) for line in fh if line.strip()]
    grid = Grid(parse_domain(fields["boxes"]), _parse_h(fields["h"]))
    return SampledFunction.from_inside_values(grid, values)


def write_function_csv(u, path):
    """Inverse of :func:`read_function_csv`."""
    h = ",".join(_fmt(v) for v in u.grid.h)
    with open(path, "w") as fh:
        fh.write(f"# h={h} boxes={u.grid.domain.spec}\n")
        for v in u.inside_values():
            fh.write(_fmt(v) + "\n")


def _sample(expr_src, grid):
    ex = parse_expression(expr_src, grid.d)
    if ex.uses("y"):
        raise ParseError("function of x only expected")
    return SampledFunction.from_callable(grid, lambda *xs: ex(x=xs))


def _cmd_norm(args):
    nf = from_spec(args.nfunction)
    omega = parse_domain(args.domain)
    if Path(args.function).is_file():
        u = read_function_csv(args.function)
        if u.grid.domain.boxes != omega.boxes:
            raise ParseError("domain in the CSV header differs from --domain")
    else:
        u = _sample(args.function, Grid(omega, _parse_h(args.h)))
    print(_fmt(luxemburg_norm(u, nf, args.rel_tol)))
    return EXIT_OK


def _cmd_decompose(args):
    omega = parse_domain(args.domain)
    cell = parse_cell(args.cell) if args.cell else None
    dec = decompose(omega, args.eps, cell)
    print(f"xi_count={dec.n_cells} lambda_measure={_fmt(dec.lambda_measure)}")
    if args.list:
        print(",".join(f"xi_{k}" for k in range(omega.d)))
        for row in dec.xi:
            print(",".join(str(int(v)) for v in row))
    return EXIT_OK


def _cmd_unfold(args):
    omega = parse_domain(args.domain)
    cell = parse_cell(args.cell) if args.cell else None
    grid = Grid(omega, _parse_h(args.h))
    dec = decompose(omega, args.eps, cell, grid)
    tw = unfold(_sample(args.function, grid), dec)
    ys = tw.y_coordinates()
    d = omega.d
    with open(args.out, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"xi_{k}" for k in range(d)] + [f"y_{k}" for k in range(d)] + ["value"])
        for xi, vals in zip(dec.xi, tw.values):
            head = [str(int(v)) for v in xi]
            for y, v in zip(ys, vals):
                writer.writerow(head + [_fmt(c) for c in y] + [_fmt(v)])
    print(f"xi_count={dec.n_cells} rows={tw.values.size}")
    return EXIT_OK


def _cmd_study(args):
    cfg = load_config(args.config)
    rep = run_study(cfg)
    print(",".join(("eps", "error", "bound", "norm", "lambda_measure")))
    for row in rep.rows:
        print(",".join(_fmt(v) for v in row.as_tuple()))
    if cfg.out:
        emit_report(rep, cfg.out)
    if rep.failures:
        for idx, message in rep.failures:
            if idx is None:
                print(f"FAIL sweep: {message}", file=sys.stderr)
            else:
                cols = ",".join(_fmt(v) for v in rep.rows[idx].as_tuple())
                print(f"FAIL row {idx}: {cols}: {message}", file=sys.stderr)
        return EXIT_ASSERT
    return EXIT_OK


def build_parser():
    parser = _Parser(prog="orlicz-unfold", description="Periodic unfolding in Orlicz spaces.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("norm", help="Luxemburg norm of a sampled function")
    p.add_argument("--nfunction", required=True, help="power:<p>, power_log:<p>, exp or table:<csv>")
    p.add_argument("--domain", required=True, help="box:<lower>;<upper>, unions joined by '+'")
    p.add_argument("--function", required=True, help="expression in x, or a function CSV file")
    p.add_argument("--rel-tol", type=float, default=DEFAULT_REL_TOL, help="bisection relative tolerance")
    p.add_argument("--h", default=str(2.0**-8), help="grid spacing for expressions (scalar or per-axis list)")
    p.set_defaults(run=_cmd_norm)

    p = sub.add_parser("decompose", help="epsilon-cell decomposition summary")
    p.add_argument("--domain", required=True, help="box:<lower>;<upper>, unions joined by '+'")
    p.add_argument("--eps", type=float, required=True, help="cell scale epsilon")
    p.add_argument("--cell", help="reference cell lengths, e.g. 1,1 (default unit cell)")
    p.add_argument("--list", action="store_true", help="also print the cell indices as CSV")
    p.set_defaults(run=_cmd_decompose)

    p = sub.add_parser("unfold", help="write the unfolded samples of a function")
    p.add_argument("--domain", required=True, help="box:<lower>;<upper>, unions joined by '+'")
    p.add_argument("--eps", type=float, required=True, help="cell scale epsilon")
    p.add_argument("--h", required=True, help="grid spacing dividing eps times the cell lengths")
    p.add_argument("--function", required=True, help="expression in x")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--cell", help="reference cell lengths (default unit cell)")
    p.set_defaults(run=_cmd_unfold)

    p = sub.add_parser("study", help="run an epsilon sweep from a config file")
    p.add_argument("--config", required=True, help="key = value study config")
    p.set_defaults(run=_cmd_study)
    return parser


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    if args.command is None:
        print(parser.format_usage(), end="", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.run(args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line driver: ``quasinv constants|map|verify|plot``.

Exit codes: 0 success, 1 verification failure, 2 usage or parse error,
3 invalid geometry.
"""

from __future__ import annotations

import argparse
import io
import sys
import time

import numpy as np

from . import __version__
from .constants import constants_for
from .errors import DomainError, InvalidGeometryError, ResolutionError
from .geometry import (extend_rows, quasi_inversion_rows, radial_extension_inverse,
                       radial_extension_rows, radial_projection)
from .report import ReportEnvelope, write_atomic
from .specfile import SpecError, load_spec
from .svg import FIGURES, render
from .verify import CHECKS, run_checks

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_GEOMETRY = 0, 1, 2, 3
MODES = ("quasi-inversion", "phi_a", "phi_a_inv", "projection")
INF_TOKEN = "inf"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="quasinv", description="Quasi-inversions of starlike domains.")
    p.add_argument("--version", action="version", version="%(prog)s " + __version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--spec", required=True, help="domain spec JSON file")
        sp.add_argument("--out", help="output file (default: standard output)")

    sp = sub.add_parser("constants", help="distortion constants of the domain")
    common(sp)

    sp = sub.add_parser("map", help="apply a map to the points of a CSV file")
    common(sp)
    sp.add_argument("--points", required=True, help="CSV file; '-' reads standard input")
    sp.add_argument("--mode", choices=MODES, default="quasi-inversion")
    sp.add_argument("--a", type=float, default=1.0, help="exponent of the radial stretch")

    sp = sub.add_parser("verify", help="sample the distortion inequalities")
    common(sp)
    sp.add_argument("--checks", default="all", help="comma-separated names or 'all'")
    sp.add_argument("--pairs", type=int, default=None)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--bound-scale", type=float, default=1.0,
                    help="multiply every upper bound (divide lower bounds); test hook")

    sp = sub.add_parser("plot", help="write an SVG figure")
    common(sp)
    sp.add_argument("--figure", choices=FIGURES, required=True)
    sp.add_argument("--radius", type=float, default=0.5, help="radius of the source circle")
    sp.add_argument("--samples", type=int, default=2048)
    return p


def _emit(text: str, out) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# CSV points
# ---------------------------------------------------------------------------

def read_points(text: str, dimension: int) -> np.ndarray:
    """Rows of ``dimension`` reals, or the single token ``inf``; '#' lines are comments."""
    rows = []
    for lineno, line in enumerate(io.StringIO(text), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        cells = [c.strip() for c in s.split(",")]
        if len(cells) == 1 and cells[0].lower() == INF_TOKEN:
            rows.append([np.inf] * dimension)
            continue
        if len(cells) != dimension:
            raise UsageError("line %d: expected %d columns, got %d" % (lineno, dimension, len(cells)))
        try:
            vals = [float(c) for c in cells]
        except ValueError:
            raise UsageError("line %d: not a number" % lineno) from None
        if not np.all(np.isfinite(vals)):
            raise UsageError("line %d: use the token 'inf' for the point at infinity" % lineno)
        rows.append(vals)
    return np.array(rows, dtype=float).reshape(-1, dimension)


def format_points(Y: np.ndarray, header: str) -> str:
    lines = ["# " + header]
    for row in Y:
        if np.any(np.isinf(row)):
            lines.append(INF_TOKEN)
        else:
            lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def map_rows(M, mode: str, a: float, X: np.ndarray) -> np.ndarray:
    if mode == "quasi-inversion":
        return quasi_inversion_rows(M, X)
    if mode == "phi_a":
        return radial_extension_rows(M, a, X)
    if mode == "phi_a_inv":
        return extend_rows(lambda Z: radial_extension_inverse(M, a, Z), X, "zero", "inf")
    if np.any(np.isinf(X)) or np.any(np.all(X == 0, axis=1)):
        raise DomainError("projection undefined at 0 and infinity")
    return radial_projection(X)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_constants(args) -> int:
    spec = load_spec(args.spec)
    t0 = time.perf_counter()
    M = spec.boundary()
    rep = constants_for(M)
    env = ReportEnvelope(spec=spec.to_dict(), constants=rep,
                         timing={"seconds": time.perf_counter() - t0})
    _emit(env.to_json(), args.out)
    return EXIT_OK


def cmd_map(args) -> int:
    spec = load_spec(args.spec)
    M = spec.boundary()
    if args.points == "-":
        text = sys.stdin.read()
    else:
        with open(args.points, encoding="utf-8") as fh:
            text = fh.read()
    X = read_points(text, M.dimension)
    Y = map_rows(M, args.mode, args.a, X)
    header = "map=%s shape=%s dimension=%d" % (args.mode, spec.shape, M.dimension)
    if args.mode in ("phi_a", "phi_a_inv"):
        header += " a=%r" % float(args.a)
    _emit(format_points(Y, header), args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    spec = load_spec(args.spec)
    if args.checks == "all":
        names = CHECKS
    else:
        names = tuple(n.strip() for n in args.checks.split(",") if n.strip())
        unknown = [n for n in names if n not in CHECKS]
        if unknown or not names:
            raise UsageError("unknown check(s): %s (expected %s)"
                             % (", ".join(unknown), ", ".join(CHECKS)))
    pairs = args.pairs if args.pairs is not None else int(spec.sampling.get("pairs", 100_000))
    seed = args.seed if args.seed is not None else spec.sampling.get("seed")
    if args.bound_scale <= 0:
        raise UsageError("--bound-scale must be positive")
    t0 = time.perf_counter()
    M = spec.boundary()
    rep = constants_for(M)
    checks = run_checks(M, names, pairs, seed, rep, args.bound_scale)
    env = ReportEnvelope(spec=spec.to_dict(), constants=rep, checks=list(checks),
                         timing={"seconds": time.perf_counter() - t0})
    _emit(env.to_json(), args.out)
    for c in checks:
        print("%-26s %s  violations=%d" % (c.name, c.verdict, c.violations), file=sys.stderr)
    return EXIT_OK if env.passed else EXIT_FAIL


def cmd_plot(args) -> int:
    spec = load_spec(args.spec)
    if args.figure in ("inversion-image", "alpha-profile") and spec.dimension != 2:
        raise UsageError("%s: 2D only" % args.figure)
    M = spec.boundary()
    _emit(render(args.figure, M, args.radius, args.samples), args.out)
    return EXIT_OK


COMMANDS = {"constants": cmd_constants, "map": cmd_map, "verify": cmd_verify, "plot": cmd_plot}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except (UsageError, SpecError, DomainError) as e:
        print("quasinv: error: %s" % e, file=sys.stderr)
        return EXIT_USAGE
    except InvalidGeometryError as e:
        print("quasinv: invalid geometry: %s" % e, file=sys.stderr)
        return EXIT_GEOMETRY
    except ResolutionError as e:
        print("quasinv: %s" % e, file=sys.stderr)
        return EXIT_FAIL
    except OSError as e:
        print("quasinv: error: %s" % e, file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

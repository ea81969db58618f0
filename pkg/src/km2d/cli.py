"""Command-line front end.

Commands
--------
verify-torus         bracket closure + regulated charges on the torus
verify-sphere        same for the sphere realization
sphere-abstract      Jacobi identities of the abstract sphere algebra
structure-constants  triple-product coefficient table (CSV)
regularization       finite-part table of the damped multiplicity sums
car-check            exhaustive anticommutator check in a sector

Exit codes: 0 all requested checks pass, 1 usage/config error, 2 check
failure, 3 unresolved-prescription path.  Identical configurations produce
byte-identical JSON reports (fixed key order, no timestamps).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

import numpy as np

from .fock import check_car, sphere_sector, torus_sector
from .halfints import to_doubled
from .harmonics import structure_table
from .lie_core import get_rep, validate_rep
from .regulator import (HeatSum, UnresolvedPrescriptionError, delta_reg_zero,
                        heat_sum_finite_part, solve_a_m)
from .verifier import (Window, WindowViolationError, check_sphere_abstract,
                       check_sphere_realization, check_torus_algebra)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FAIL = 2
EXIT_UNRESOLVED = 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        sys.exit(EXIT_USAGE)


def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def _write_report(payload: dict, path: str | None) -> None:
    text = json.dumps(_jsonify(payload), indent=2) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _half(value: str) -> Fraction:
    try:
        return Fraction(to_doubled(value), 2)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _window(value: str) -> Window:
    try:
        wz, wa, n = value.split(",")
        return Window.of(Fraction(wz), Fraction(wa), int(n))
    except Exception:
        raise argparse.ArgumentTypeError(
            f"window must be 'Wz,Wa,N', got {value!r}") from None


def _threads() -> int | None:
    val = os.environ.get("KM2D_THREADS")
    return int(val) if val else None


def _apply_config_file(argv: list) -> list:
    """Prepend key=value pairs from --config as flags (explicit flags win)."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        return argv
    path = argv[i + 1]
    rest = argv[:i] + argv[i + 2:]
    extra = []
    try:
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                key, _, value = line.partition("=")
                extra += [f"--{key.strip()}", value.strip()]
    except OSError as exc:
        sys.stderr.write(f"error: cannot read config {path}: {exc}\n")
        sys.exit(EXIT_USAGE)
    return rest[:1] + extra + rest[1:]


def build_parser() -> _Parser:
    parser = _Parser(prog="km2d", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--rep", default="so3-adjoint",
                       help="Lie algebra representation name")
        p.add_argument("--d", type=int, default=None,
                       help="expected flavour count (checked against the rep)")
        p.add_argument("--tol", type=float, default=1e-9)
        p.add_argument("--output", default=None)
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--config", default=None, help=argparse.SUPPRESS)

    pt = sub.add_parser("verify-torus", help="certify the torus algebra")
    add_common(pt)
    pt.add_argument("--sectors", default="NS,NS",
                    help="z,angular sectors, e.g. NS,NS or R,NS")
    pt.add_argument("--cutoff-m", type=_half, default=Fraction(9, 2))
    pt.add_argument("--cutoff-p", type=_half, default=Fraction(9, 2))
    pt.add_argument("--window", type=_window, default=Window.of(1, 1, 2))
    pt.add_argument("--max-mode", type=int, default=2)
    pt.add_argument("--method", choices=("analytic", "eps", "raw"),
                    default="analytic")

    ps = sub.add_parser("verify-sphere", help="certify the sphere realization")
    add_common(ps)
    ps.add_argument("--sectors", default="R", help="z sector, R or NS")
    ps.add_argument("--cutoff-l", type=_half, default=Fraction(4))
    ps.add_argument("--lmax", type=int, default=None,
                    help="structure-table degree (default: cutoff)")
    ps.add_argument("--window", type=_window, default=Window.of(1, 1, 2))
    ps.add_argument("--max-l", type=int, default=1)
    ps.add_argument("--central-tol", type=float, default=1e-8)
    ps.add_argument("--method", choices=("analytic", "raw"), default="analytic")

    pa = sub.add_parser("sphere-abstract", help="abstract Jacobi identities")
    add_common(pa)
    pa.add_argument("--lmax", type=int, default=8)
    pa.add_argument("--l-probe", type=int, default=2)
    pa.set_defaults(tol=1e-10)

    pc = sub.add_parser("structure-constants", help="export the product table")
    add_common(pc)
    pc.add_argument("--lmax", type=int, default=4)
    pc.set_defaults(format="csv")

    pr = sub.add_parser("regularization", help="finite-part table")
    add_common(pr)
    pr.add_argument("--sphere-m", type=int, nargs="*", default=[0, 1, 2])
    pr.add_argument("--include-sphere-ns", action="store_true")
    pr.add_argument("--raw-scan", action="store_true",
                    help="also scan the raw central term against the "
                         "angular cutoff (documents the divergence)")

    pk = sub.add_parser("car-check", help="anticommutation relations")
    add_common(pk)
    pk.add_argument("--geometry", choices=("torus", "sphere"), default="torus")
    pk.add_argument("--sectors", default="NS,NS")
    pk.add_argument("--cutoff-m", type=_half, default=Fraction(3, 2))
    pk.add_argument("--cutoff-p", type=_half, default=Fraction(3, 2))
    pk.add_argument("--cutoff-l", type=_half, default=Fraction(1))
    return parser


def _check_rep(args):
    rep = get_rep(args.rep)
    if args.d is not None and args.d != rep.d:
        sys.stderr.write(
            f"error: --d {args.d} does not match representation "
            f"{args.rep} with d={rep.d}\n")
        sys.exit(EXIT_USAGE)
    check = validate_rep(rep)
    if not check.passed:
        sys.stderr.write(f"error: representation {args.rep} invalid\n")
        sys.exit(EXIT_USAGE)
    return rep


def _cmd_verify_torus(args) -> int:
    rep = _check_rep(args)
    try:
        z, ang = (s.strip() for s in args.sectors.split(","))
    except ValueError:
        sys.stderr.write("error: --sectors needs 'z,angular'\n")
        return EXIT_USAGE
    if args.cutoff_m <= 0 or args.cutoff_p <= 0:
        sys.stderr.write("error: cutoffs must be positive\n")
        return EXIT_USAGE
    try:
        cfg = torus_sector(z, ang, rep.d, args.cutoff_m, args.cutoff_p)
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    method = {"eps": "eps_extrapolated"}.get(args.method, args.method)
    report = check_torus_algebra(cfg, rep, args.window, tol=args.tol,
                                 max_mode=args.max_mode,
                                 central_method=method, threads=_threads())
    payload = report.to_dict()
    _write_report(payload, args.output)
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_verify_sphere(args) -> int:
    rep = _check_rep(args)
    z = args.sectors.split(",")[0].strip()
    try:
        cfg = sphere_sector(z, rep.d, args.cutoff_l)
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    l_max = args.lmax if args.lmax is not None else int(args.cutoff_l)
    if l_max < int(args.cutoff_l):
        sys.stderr.write("error: --lmax below --cutoff-l\n")
        return EXIT_USAGE
    table = structure_table(l_max)
    try:
        report = check_sphere_realization(
            cfg, rep, table, args.window, tol=args.tol, max_l=args.max_l,
            central_method=args.method, central_tol=args.central_tol,
            threads=_threads())
    except UnresolvedPrescriptionError as exc:
        sys.stderr.write(f"unresolved prescription: {exc}\n")
        return EXIT_UNRESOLVED
    _write_report(report.to_dict(), args.output)
    return EXIT_OK if report.passed else EXIT_FAIL


def _cmd_sphere_abstract(args) -> int:
    rep = _check_rep(args)
    if args.lmax < 3 * args.l_probe:
        sys.stderr.write(f"error: need --lmax >= {3 * args.l_probe} "
                         f"for --l-probe {args.l_probe}\n")
        return EXIT_USAGE
    table = structure_table(args.lmax)
    report = check_sphere_abstract(table, rep, l_probe=args.l_probe,
                                   tol=args.tol)
    _write_report(report, args.output)
    return EXIT_OK if report["pass"] else EXIT_FAIL


def _cmd_structure_constants(args) -> int:
    if args.lmax < 0:
        sys.stderr.write("error: --lmax must be nonnegative\n")
        return EXIT_USAGE
    table = structure_table(args.lmax)
    if args.format == "csv":
        if args.output:
            with open(args.output, "w") as fh:
                table.to_csv(fh)
        else:
            table.to_csv(sys.stdout)
    else:
        payload = {"L_max": table.L_max,
                   "entries": {f"{k}": v for k, v in sorted(table.entries.items())}}
        _write_report(payload, args.output)
    return EXIT_OK


def _cmd_regularization(args) -> int:
    rows = []
    rows.append({"descriptor": "torus NS", "pole": 0.5,
                 "finite_part": heat_sum_finite_part(HeatSum(1, 0.0))[1],
                 "delta_reg0": delta_reg_zero("torus", "NS")})
    rows.append({"descriptor": "torus R", "pole": 0.5,
                 "finite_part": heat_sum_finite_part(HeatSum(1, -0.5))[1],
                 "delta_reg0": delta_reg_zero("torus", "R")})
    for m in args.sphere_m:
        a_m = solve_a_m(m)
        hs = HeatSum(2, 2 * abs(m) + a_m)
        pole, fin = heat_sum_finite_part(hs)
        rows.append({"descriptor": f"sphere R m={m}", "a_m": a_m,
                     "pole": pole, "finite_part": fin,
                     "delta_reg0": delta_reg_zero("sphere", "R", m)})
    code = EXIT_OK
    if args.include_sphere_ns:
        try:
            delta_reg_zero("sphere", "NS")
        except UnresolvedPrescriptionError as exc:
            rows.append({"descriptor": "sphere NS",
                         "error": f"unresolved prescription: {exc}"})
            code = EXIT_UNRESOLVED
    header = f"{'descriptor':<16} {'pole':>8} {'finite part':>12} {'delta_reg(0)':>13}"
    lines = [header, "-" * len(header)]
    for r in rows:
        if "error" in r:
            lines.append(f"{r['descriptor']:<16} {r['error']}")
        else:
            lines.append(f"{r['descriptor']:<16} {r['pole']:>8.4g} "
                         f"{r['finite_part']:>12.10g} {r['delta_reg0']:>13.10g}")
    scan = None
    if args.raw_scan:
        from .verifier import central_raw_scan
        rep = _check_rep(args)
        scan = central_raw_scan("NS", "NS", rep.d, rep, Fraction(5, 2),
                                [Fraction(5, 2), Fraction(9, 2), Fraction(13, 2)])
        lines.append("")
        lines.append("raw current central term vs angular cutoff "
                     "(divergence before regularization):")
        for r in scan:
            lines.append(f"  |p| <= {r['p_cut']:<5} modes={r['angular_modes']:>3} "
                         f"raw central = {r['raw_central']:.6g}")
    print("\n".join(lines))
    if args.output:
        payload = {"rows": rows}
        if scan is not None:
            payload["raw_scan"] = scan
        _write_report(payload, args.output)
    return code


def _cmd_car_check(args) -> int:
    rep_d = args.d if args.d is not None else 2
    try:
        if args.geometry == "torus":
            z, ang = (s.strip() for s in args.sectors.split(","))
            cfg = torus_sector(z, ang, rep_d, args.cutoff_m, args.cutoff_p)
        else:
            z = args.sectors.split(",")[0].strip()
            cfg = sphere_sector(z, rep_d, args.cutoff_l)
    except ValueError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    residual = check_car(cfg)
    payload = {"task": "car-check", "sector": cfg.describe(),
               "max_residual": residual, "pass": residual <= 1e-14}
    _write_report(payload, args.output)
    return EXIT_OK if residual <= 1e-14 else EXIT_FAIL


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    argv = _apply_config_file(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    handler = {
        "verify-torus": _cmd_verify_torus,
        "verify-sphere": _cmd_verify_sphere,
        "sphere-abstract": _cmd_sphere_abstract,
        "structure-constants": _cmd_structure_constants,
        "regularization": _cmd_regularization,
        "car-check": _cmd_car_check,
    }[args.command]
    try:
        return handler(args)
    except UnresolvedPrescriptionError as exc:
        sys.stderr.write(f"unresolved prescription: {exc}\n")
        return EXIT_UNRESOLVED
    except WindowViolationError as exc:
        sys.stderr.write(f"error: window/cutoff combination invalid: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""einglue command-line front end.

Every command writes one report (JSON by default) carrying ``schema: 1``,
the tool version and the fully resolved configuration.  Exit codes: 0 ok,
2 invalid configuration, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile

import numpy as np

from einglue import __version__
from einglue.errors import ConfigurationError, DomainError, NumericError
from einglue.estimates import CSV_COLUMNS, convergence_table, load_scenarios
from einglue.geometry import curvature_scan, frame_curvature
from einglue.gluing import (
    GluedMetricSpec,
    error_sup_norm,
    error_support_check,
    glued_profile,
    negativity_certificate,
)
from einglue.profiles import a_max_and_v, cone_angle, model_profile, solve_cone_angle
from einglue import tensorlab as tl

SCHEMA = 1


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_int(minimum):
    def conv(text):
        try:
            v = int(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
        if v < minimum:
            raise argparse.ArgumentTypeError(f"must be >= {minimum}, got {v}")
        return v

    return conv


def _positive_float(text):
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not (math.isfinite(v) and v > 0):
        raise argparse.ArgumentTypeError(f"must be a positive finite number, got {text!r}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="einglue", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"einglue {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, d_default=2):
        sp.add_argument("--n", type=_positive_int(4), required=True, help="dimension (>= 4)")
        sp.add_argument("--d", type=_positive_int(1), default=d_default, help="branch degree")
        sp.add_argument("--out", default="-", help="output path, '-' for stdout")
        sp.add_argument("--format", choices=("json", "csv"), default="json")

    sp = sub.add_parser("profile-solve", help="solve for a(d) with cone angle 2 pi / d")
    common(sp)

    sp = sub.add_parser("curvature-scan", help="closed-form curvature extremes over a u-range")
    common(sp)
    sp.add_argument("--uglue", type=_positive_float, help="scan the glued metric instead of g_a")
    sp.add_argument("--umax", type=_positive_float, help="upper end of the scan (default 4 U_glue or 1e3)")
    sp.add_argument("--samples", type=_positive_int(2), default=1000)

    sp = sub.add_parser("glue-verify", help="support, sup-norm and negativity checks")
    common(sp)
    sp.add_argument("--uglue", type=_positive_float, required=True)
    sp.add_argument("--samples", type=_positive_int(100), default=1000)

    sp = sub.add_parser("scenario-table", help="L2 bound table for a scenario sequence")
    sp.add_argument("--input", required=True, help="JSON array of scenarios")
    sp.add_argument("--out", default="-")
    sp.add_argument("--format", choices=("json", "csv"), default="csv")

    sp = sub.add_parser("tensorlab-check", help="finite-difference checks of the closed forms")
    common(sp)
    sp.add_argument("--check", choices=("frame", "kernel", "linearization"), default="frame")
    sp.add_argument("--u0", type=_positive_float, default=2.0)
    sp.add_argument("--spacing", type=_positive_float, default=0.01)
    sp.add_argument("--seed", type=int, default=0)
    return p


def _threads() -> int:
    raw = os.environ.get("THREADS")
    if raw is None:
        return os.cpu_count() or 1
    try:
        v = int(raw)
    except ValueError:
        raise UsageError(f"THREADS must be a positive integer, got {raw!r}")
    if v < 1:
        raise UsageError(f"THREADS must be a positive integer, got {raw!r}")
    return v


# -- commands ---------------------------------------------------------------


def cmd_profile_solve(args) -> dict:
    sol = solve_cone_angle(args.n, args.d)
    a_max, v = a_max_and_v(args.n)
    out = sol.to_dict()
    out.update(a_max=a_max, v=v, cone_angle=cone_angle(args.n, sol.a_of_d), target_angle=2 * math.pi / args.d)
    return out


def _spec_or_model(args):
    sol = solve_cone_angle(args.n, args.d)
    if getattr(args, "uglue", None) is not None:
        spec = GluedMetricSpec.build(args.n, args.d, args.uglue)
        return sol, spec, glued_profile(spec)
    return sol, None, model_profile(args.n, sol.a_of_d)


def cmd_curvature_scan(args) -> dict:
    sol, spec, prof = _spec_or_model(args)
    lo = sol.u_of_d if sol.a_of_d != 0 else prof.domain_lower
    hi = args.umax if args.umax is not None else (4.0 * args.uglue if spec else 1e3)
    scan = curvature_scan(prof, args.n, (lo, hi), args.samples)
    return {"profile": prof.kind, "a": sol.a_of_d, "u_range": [lo, hi], **scan.to_dict()}


def cmd_glue_verify(args) -> dict:
    spec = GluedMetricSpec.build(args.n, args.d, args.uglue)
    support = error_support_check(spec)
    sup, at = error_sup_norm(spec, args.samples, with_witness=True)
    cert = negativity_certificate(spec, samples=args.samples)
    fc = frame_curvature(glued_profile(spec), args.n, spec.u_a)
    return {
        "spec": spec.to_dict(),
        "support": support.to_dict(),
        "sup_error": sup,
        "sup_error_witness_u": at,
        "negativity": cert.to_dict(),
        "fiber_curvature_at_u_a": float(fc.k_fiber),
        "fiber_curvature_expected": -1.0 / spec.u_a**2,
    }


def cmd_scenario_table(args) -> dict:
    try:
        seq = load_scenarios(args.input)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read scenarios from {args.input}: {exc}")
    table = convergence_table(seq, workers=_threads())
    return table.to_dict()


def cmd_tensorlab_check(args) -> dict:
    n = args.n
    sol = solve_cone_angle(n, args.d)
    if args.check == "kernel":
        u_lo = sol.u_of_d if sol.a_of_d > 0 else 1.0
        us = np.geomspace(2.0 * u_lo, 50.0, 200)
        return {"check": "kernel", "a": sol.a_of_d, **tl.kernel_direction_check(n, sol.a_of_d, us).to_dict()}
    prof = model_profile(n, sol.a_of_d)
    if args.check == "frame":
        fd = tl.fd_frame_richardson(prof, args.u0, args.spacing)
        fc = frame_curvature(prof, n, args.u0)
        closed = {
            "k_base": fc.k_base, "k_mixed": fc.k_mixed, "k_mixed_theta": fc.k_mixed,
            "k_fiber": fc.k_fiber, "ric_u": fc.ric_diag[0], "ric_theta": fc.ric_diag[1],
            "ric_fiber": fc.ric_diag[2],
        }
        diff = {k: abs(fd[k] - closed[k]) for k in tl.FRAME_KEYS}
        return {"check": "frame", "u0": args.u0, "spacing": args.spacing, "fd": fd,
                "closed_form": closed, "max_abs_difference": max(diff.values())}
    grid = tl.ansatz_patch(prof, args.u0, args.spacing)
    gb = tl.metric_field(grid)
    h = tl.random_symmetric_field(grid, seed=args.seed)
    rep = tl.linearization_check(grid, gb, h)
    return {"check": "linearization", "u0": args.u0, "spacing": args.spacing,
            "extent": grid.extents[0], **rep.to_dict()}


COMMANDS = {
    "profile-solve": cmd_profile_solve,
    "curvature-scan": cmd_curvature_scan,
    "glue-verify": cmd_glue_verify,
    "scenario-table": cmd_scenario_table,
    "tensorlab-check": cmd_tensorlab_check,
}


# -- output -----------------------------------------------------------------


def _clean(obj):
    """Plain JSON types; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def _flatten(obj, prefix=""):
    if isinstance(obj, dict):
        for k in sorted(obj):
            yield from _flatten(obj[k], f"{prefix}{k}.")
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            yield from _flatten(v, f"{prefix}{i}.")
    else:
        yield prefix[:-1], obj


def render(report: dict, fmt: str) -> str:
    report = _clean(report)
    if fmt == "json":
        return json.dumps(report, indent=2, sort_keys=True) + "\n"
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    rows = report["result"].get("rows") if report["command"] == "scenario-table" else None
    if rows is not None:
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([r[c] for c in CSV_COLUMNS])
    else:
        w.writerow(["key", "value"])
        for k, v in _flatten(report):
            w.writerow([k, v])
    return buf.getvalue()


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".einglue-", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fail(kind: str, message: str, code: int) -> int:
    sys.stderr.write(json.dumps({"error": {"type": kind, "message": message, "exit_code": code}}, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail("usage", str(exc), 2)
    config = dict(vars(args))
    try:
        result = COMMANDS[args.command](args)
        text = render(
            {"schema": SCHEMA, "tool": "einglue", "version": __version__,
             "command": args.command, "config": config, "result": result},
            args.format,
        )
        if args.out == "-":
            sys.stdout.write(text)
        else:
            write_atomic(args.out, text)
    except UsageError as exc:
        return _fail("usage", str(exc), 2)
    except (ConfigurationError, DomainError) as exc:
        return _fail(type(exc).__name__, str(exc), 2)
    except (NumericError, FloatingPointError, ArithmeticError) as exc:
        return _fail(type(exc).__name__, str(exc), 3)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

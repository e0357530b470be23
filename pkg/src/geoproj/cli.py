"""Command-line front end.

Subcommands: zoo (catalogue), geodesic (trace runs), check (equivalence,
affinity, isometry), verify (closed-form identities), accept (the full
acceptance suite).  Reports are JSON with sorted keys so identical
invocations at the same seed produce byte-identical output; exit codes are
0 for pass, 1 for a failed check, 2 for usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import acceptance, expr, sampling, zoo
from .expr import ExpressionError
from .flow import GeodesicState, integrate_geodesic, trace_to_csv
from .integrals import (check_conservation, energy_integral,
                        liouville_integral, liouville_integral_printed)
from .metric import DomainError, chart_from_dict, chart_to_dict, pullback
from .projective import (EQUIVALENT, check_affinity, check_isometry,
                         check_projective_equivalence)


class UsageError(Exception):
    pass


def _emit(data, path=None):
    text = json.dumps(data, sort_keys=True, indent=2) + "\n"
    sys.stdout.write(text)
    if path:
        with open(path, "w") as fh:
            fh.write(text)


def _parse_field(text, flag):
    try:
        return expr.parse_prefix(text)
    except ExpressionError as err:
        raise UsageError("bad expression for %s: %s" % (flag, err))


_PARAM_FLAGS = [
    ("a", "a", float), ("ell", "l", float), ("eps", "eps", float),
    ("c", "c", float), ("sign", "sign", int),
    ("f", "f", "field"), ("h", "h", "field"),
    ("h1", "h1", "field"), ("h2", "h2", "field"),
]


def _collect_overrides(args):
    kwargs = {}
    for flag, key, conv in _PARAM_FLAGS:
        value = getattr(args, flag, None)
        if value is None:
            continue
        kwargs[key] = (_parse_field(value, "--" + flag)
                       if conv == "field" else conv(value))
    return kwargs


def _build(name, kwargs):
    try:
        return zoo.build_bundle(name, **kwargs)
    except KeyError as err:
        raise UsageError(err.args[0])
    except TypeError:
        raise UsageError("chart %r does not take parameters %s"
                         % (name, sorted(kwargs)))
    except zoo.ZooError as err:
        raise UsageError("cannot build %r: %s" % (name, err))


def _resolve_chart(ref, kwargs=None):
    """A catalogue name or a path to a serialized chart file."""
    if ref.endswith(".json") or os.path.sep in ref:
        if not os.path.exists(ref):
            raise UsageError("chart file not found: %s" % ref)
        with open(ref) as fh:
            try:
                return chart_from_dict(json.load(fh)), None
            except (ValueError, KeyError, DomainError) as err:
                raise UsageError("bad chart file %s: %s" % (ref, err))
    bundle = _build(ref, kwargs or {})
    return bundle.chart, bundle


def cmd_zoo(args):
    table = zoo.catalogue()
    if args.action == "list":
        for name, entry in table.items():
            sys.stdout.write("%-20s %s\n" % (name, entry.summary))
        return 0
    bundle = _build(args.name, _collect_overrides(args))
    out = {
        "schema": 1,
        "chart": chart_to_dict(bundle.chart),
        "killing": None if bundle.killing is None else bundle.killing.name,
        "integrals": list(bundle.integrals),
        "maps": list(bundle.maps),
    }
    sb = bundle.extras.get("shift_bundle")
    if sb is not None:
        out["construction"] = {
            "eps_bound": sb.eps_bound,
            "profile_max": sb.f_max,
            "seam_residual": zoo.shift_seam_residual(sb),
        }
    _emit(out, args.json)
    return 0


def cmd_geodesic(args):
    if args.chart_file:
        chart, bundle = _resolve_chart(args.chart_file)
    elif args.chart:
        chart, bundle = _resolve_chart(args.chart, _collect_overrides(args))
    else:
        raise UsageError("give either --chart or --chart-file")

    state = GeodesicState(args.x0, args.y0, args.vx0, args.vy0)
    try:
        trace = integrate_geodesic(chart, state, args.tmax)
    except DomainError as err:
        raise UsageError("bad initial condition: %s" % err)

    extras = []
    if bundle is not None:
        extras = [(name, integral.value_at_state)
                  for name, integral in bundle.integrals.items()
                  if name != "energy"]
    if args.csv:
        with open(args.csv, "w") as fh:
            trace_to_csv(chart, trace, fh, extra_columns=extras)

    energy = energy_integral(chart)
    vals = [energy.value_at_state(trace.state_at_index(i))
            for i in range(len(trace.ts))]
    end = trace.final_state()
    _emit({
        "schema": 1,
        "chart": chart.name,
        "termination": trace.termination.value,
        "t_final": end.t,
        "state": {"x": end.x, "y": end.y, "vx": end.vx, "vy": end.vy},
        "steps": {"accepted": trace.n_accepted, "rejected": trace.n_rejected},
        "energy_drift": float(max(abs(v - vals[0]) for v in vals)),
    }, args.json)
    return 0


def cmd_check(args):
    chart, bundle = _resolve_chart(args.chart, _collect_overrides(args))

    if args.map:
        if bundle is None or args.map not in bundle.maps:
            have = [] if bundle is None else sorted(bundle.maps)
            raise UsageError("chart %r has no map %r; available: %s"
                             % (args.chart, args.map, ", ".join(have) or "none"))
        cmap = bundle.maps[args.map]
        if args.kind == "isometry":
            rep = check_isometry(chart, cmap, tol=args.tol or 1e-8,
                                 seed=args.seed)
            _emit(rep.to_json_dict(), args.json)
            return 0 if rep.passed else 1
        if args.kind == "affine":
            rep = check_affinity(chart, cmap, tol=args.tol or 1e-6,
                                 seed=args.seed)
            _emit(rep.to_json_dict(), args.json)
            return 0 if rep.passed else 1
        other = pullback(chart, cmap, name="%s*%s" % (args.map, chart.name))
    elif args.chart_b:
        if args.kind != "projective":
            raise UsageError("%s takes --map, not --chart-b" % args.kind)
        other, _ = _resolve_chart(args.chart_b)
    else:
        raise UsageError("give --chart-b (projective) or --map")

    rep = check_projective_equivalence(
        chart, other, n_traces=args.samples or 20,
        drift_tol=args.tol or 1e-6, t_max=args.tmax or 1.0, seed=args.seed)
    _emit(rep.to_json_dict(), args.json)
    return 0 if rep.verdict == EQUIVALENT else 1


def cmd_verify(args):
    seed = args.seed if args.seed is not None else sampling.default_seed()

    if args.identity == "rescaling":
        n = args.samples or 1000
        worst, at = zoo.sample_rescaling_identity(n, seed=seed)
        out = {"schema": 1, "identity": "rescaling", "samples": n,
               "seed": seed, "worst_residual": worst, "tol": 1e-10,
               "pass": worst <= 1e-10}
        _emit(out, args.json)
        return 0 if out["pass"] else 1

    if args.identity == "shift-relation":
        n = args.samples or 100
        bundle = zoo.projective_shift()
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(n):
            x = float(rng.uniform(-2.0, 2.0))
            k = int(rng.integers(-2, 4))
            worst = max(worst, zoo.shift_relation_residual(bundle, x, k))
        out = {"schema": 1, "identity": "shift-relation", "samples": n,
               "seed": seed, "worst_residual": worst, "tol": 1e-8,
               "pass": worst <= 1e-8}
        _emit(out, args.json)
        return 0 if out["pass"] else 1

    if args.identity == "tannery-reparam":
        n = args.samples or 101
        worst = 0.0
        for t in np.linspace(-5.0, 5.0, n):
            x = zoo.tannery_reparam_x(float(t))
            s2 = math.sin(x) ** 2
            rhs = -math.cosh(float(t)) ** 2
            worst = max(worst, abs(s2 / (1.0 - 2.0 * s2) - rhs) / abs(rhs))
        out = {"schema": 1, "identity": "tannery-reparam", "samples": n,
               "worst_residual": worst, "tol": 1e-10, "pass": worst <= 1e-10}
        _emit(out, args.json)
        return 0 if out["pass"] else 1

    # liouville-variants: the separation integral against the alternate
    # transcription; only the standard form has to conserve
    chart, sep = zoo.liouville_chart()
    h1 = 2.0 + expr.sin(4.0 * math.pi * expr.X)
    h2 = 5.0 - expr.sin(4.0 * math.pi * expr.Y)
    alt = liouville_integral_printed(h1, h2, sign=1)
    std = check_conservation(chart, sep, n_samples=args.samples or 20,
                             t_max=args.tmax or 1.0, seed=seed, tol=1e-6)
    other = check_conservation(chart, alt, n_samples=args.samples or 20,
                               t_max=args.tmax or 1.0, seed=seed, tol=1e-6)
    out = {"schema": 1, "identity": "liouville-variants", "seed": seed,
           "separable_drift": std.max_drift,
           "alternate_form_drift": other.max_drift,
           "tol": 1e-6, "pass": std.passed}
    _emit(out, args.json)
    return 0 if out["pass"] else 1


def cmd_accept(args):
    seed = args.seed if args.seed is not None else sampling.default_seed()
    results = acceptance.run_all(seed)
    for res in results:
        sys.stdout.write(res.line() + "\n")
    ok = all(r.passed for r in results)
    _emit({"schema": 1, "seed": seed, "pass": ok,
           "criteria": [r.to_json_dict() for r in results]}, args.json)
    return 0 if ok else 1


def _add_param_flags(p):
    p.add_argument("--a", help="family scale parameter")
    p.add_argument("--ell", help="family shape parameter")
    p.add_argument("--eps", help="shear gain per period")
    p.add_argument("--c", help="profile offset")
    p.add_argument("--sign", help="separable metric signature, +1 or -1")
    p.add_argument("--f", help="profile f(x), prefix expression")
    p.add_argument("--h", help="odd profile h(x), prefix expression")
    p.add_argument("--h1", help="separable h1(x), prefix expression")
    p.add_argument("--h2", help="separable h2(y), prefix expression")


def _add_common(p):
    p.add_argument("--seed", type=int, default=None,
                   help="RNG seed (default: GEOPROJ_SEED or 12345)")
    p.add_argument("--json", metavar="PATH", default=None,
                   help="also write the JSON report to this file")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="geoproj",
        description="surface metrics sharing geodesics: catalogue, flows, "
                    "equivalence checks")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("zoo", help="list the catalogue or show one chart")
    zsub = p.add_subparsers(dest="action", required=True)
    zlist = zsub.add_parser("list", help="one line per chart")
    zlist.set_defaults(func=cmd_zoo)
    zshow = zsub.add_parser("show", help="serialize one chart as JSON")
    zshow.add_argument("name")
    _add_param_flags(zshow)
    _add_common(zshow)
    zshow.set_defaults(func=cmd_zoo)

    p = sub.add_parser("geodesic", help="integrate one geodesic")
    p.add_argument("--chart", help="catalogue chart name")
    p.add_argument("--chart-file", help="serialized chart JSON file")
    _add_param_flags(p)
    p.add_argument("--x0", type=float, required=True)
    p.add_argument("--y0", type=float, required=True)
    p.add_argument("--vx0", type=float, required=True)
    p.add_argument("--vy0", type=float, required=True)
    p.add_argument("--tmax", type=float, default=1.0)
    p.add_argument("--csv", metavar="PATH", help="write the trace as CSV")
    _add_common(p)
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("check", help="compare two metrics or grade a map")
    p.add_argument("kind", choices=["projective", "affine", "isometry"])
    p.add_argument("--chart", required=True,
                   help="catalogue name or chart file")
    p.add_argument("--chart-b", help="second chart (projective only)")
    p.add_argument("--map", help="named map of the chart's bundle")
    _add_param_flags(p)
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--tmax", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("verify", help="closed-form identity spot checks")
    p.add_argument("identity", choices=[
        "rescaling", "shift-relation", "tannery-reparam",
        "liouville-variants"])
    p.add_argument("--samples", type=int, default=None)
    p.add_argument("--tmax", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("accept", help="run the ten acceptance criteria")
    _add_common(p)
    p.set_defaults(func=cmd_accept)

    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as err:
        sys.stderr.write("error: %s\n" % err)
        return 2


if __name__ == "__main__":
    sys.exit(main())

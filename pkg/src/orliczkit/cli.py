"""``orlicz-analyze``: batch front end over scenario files.

Exit codes: 0 success, 2 configuration error, 3 numerical non-convergence.
"""
import argparse
import json
import math
import sys
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .analysis import (boundedness_certificate, compactness_verdict, epsilon_profile,
                       essential_norm_bounds)
from .errors import ConfigError, ConvergenceError, DomainError
from .measure import MeasurableFunction
from .operators import change_of_variables_check
from .oracle import operator_norm_estimate, truncation_distances, witness_separation
from .orlicz import luxemburg_norm
from .scenario import load_scenario
from .young import validate

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
SCHEMA = 1
SUBCOMMANDS = ("validate", "norm", "bounded", "compact", "essnorm", "oracle", "report")


def jsonable(value):
    """Plain JSON types; infinities become ``"+inf"``/``"-inf"``."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "+inf" if v > 0 else "-inf"
        return v
    return value


def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, float):
        if math.isinf(v):
            return "+inf" if v > 0 else "-inf"
        return f"{v:.6g}"
    return str(v)


# --- sections ---------------------------------------------------------------------------

def _validate_section(sc):
    diagnostics = {}
    ok = True
    for name, phi in (("phi1", sc.phi1), ("phi2", sc.phi2)):
        diags = validate(phi)
        diagnostics[name] = [{"check": d.check, "passed": d.passed, "point": d.point,
                              "detail": d.detail} for d in diags]
        ok &= all(d.passed for d in diags)
    out = {"valid": bool(ok), "young": diagnostics}
    if sc.operator.mode == "composition":
        f = MeasurableFunction.constant(sc.space, 1.0) if not sc.space.has_tail \
            else MeasurableFunction.from_expr(sc.space, "1/j^2" if sc.space.interval is None
                                              else {"interval": "1", "atoms": "1/j^2"})
        out["change_of_variables_residual"] = change_of_variables_check(
            sc.operator.transformation, sc.phi2, f, sc.space, sc.operator.weight(sc.space))
    return out


def _norm_section(sc, expr):
    f = MeasurableFunction.from_expr(sc.space, expr)
    return {"function": expr if isinstance(expr, str) else json.dumps(expr),
            "N_phi1": luxemburg_norm(sc.phi1, f, sc.space),
            "N_phi2": luxemburg_norm(sc.phi2, f, sc.space)}


class _Analysis:
    """Lazily shared analysis artifacts for one run."""

    def __init__(self, sc):
        self.sc = sc
        self._profile = self._cert = self._bounds = None

    @property
    def profile(self):
        if self._profile is None:
            sc = self.sc
            self._profile = epsilon_profile(sc.phi1, sc.phi2, sc.operator, sc.space,
                                            sc.options.alpha_grid)
        return self._profile

    @property
    def certificate(self):
        if self._cert is None:
            sc = self.sc
            self._cert = boundedness_certificate(sc.phi1, sc.phi2, sc.operator, sc.space,
                                                 sc.options.alpha_grid)
        return self._cert

    @property
    def bounds(self):
        if self._bounds is None:
            self._bounds = essential_norm_bounds(self.profile, self.sc.space)
        return self._bounds

    def bounded(self):
        return {"bounded": self.certificate.to_dict()}

    def essnorm(self):
        b = self.bounds
        return {"beta": {"forall": b.beta_forall, "exists": b.beta_exists},
                "notes": list(b.notes)}

    def compact(self):
        v = compactness_verdict(self.profile, self.certificate, self.bounds)
        b = self.bounds
        return {"compact": v.verdict,
                "compact_sufficient": b.beta_exists == 0.0,
                "compact_necessary": b.beta_forall == 0.0,
                "rules": {"compact": v.rule, "reasons": list(v.reasons)}}


def _default_region(sc, n):
    mu = sc.space
    if sc.options.witness_region is not None:
        return sc.options.witness_region
    if mu.interval is not None:
        return ("interval", mu.interval.lo, mu.interval.hi)
    if mu.has_tail:
        start = max(1000, mu.n_atoms + 1)
        return tuple(range(start, start + n))
    if mu.n_atoms >= n:
        return tuple(range(mu.n_atoms - n + 1, mu.n_atoms + 1))
    return None


def _oracle_section(sc, args):
    o = sc.options
    seed = o.seed if args.seed is None else args.seed
    trunc = o.trunc if args.trunc is None else args.trunc
    samples = o.samples if args.samples is None else args.samples
    keep = o.keep if not args.keep else tuple(args.keep)
    n = o.witness_count if args.witness_count is None else args.witness_count
    est = operator_norm_estimate(sc.phi1, sc.phi2, sc.operator, sc.space, trunc, samples, seed)
    out = {"label": est.label,
           "settings": {"seed": seed, "trunc": trunc, "samples": samples, "keep": list(keep),
                        "witness_count": n},
           "operator_norm": {"lower": est.lower, "source": est.source}}
    if sc.space.has_tail or sc.space.n_atoms:
        dist = truncation_distances(sc.phi1, sc.phi2, sc.operator, sc.space, keep, samples,
                                    seed, o.window)
        out["truncation_distance"] = {str(k): v for k, v in dist.items()}
    region = _default_region(sc, n)
    if region is not None:
        ws = witness_separation(sc.phi1, sc.phi2, sc.operator, sc.space, region, n)
        out["witness_separation"] = {
            "region": list(region) if region[0] != "interval" else
            {"interval": [region[1], region[2]]},
            "n": ws.n, "min_pairwise": ws.min_pairwise, "min_image_norm": ws.min_image_norm}
    return out


# --- output -----------------------------------------------------------------------------

def _summary_lines(result):
    lines = []
    if "valid" in result:
        lines.append(f"valid: {result['valid']}")
        for name, diags in result["young"].items():
            for d in diags:
                if not d["passed"]:
                    where = "" if d["point"] is None else f" at x = {_fmt(d['point'])}"
                    lines.append(f"  {name}: {d['check']} failed{where}: {d['detail']}")
        if "change_of_variables_residual" in result:
            lines.append(f"change of variables residual: "
                         f"{_fmt(result['change_of_variables_residual'])}")
    if "N_phi1" in result:
        lines.append(f"N_phi1({result['function']}) = {_fmt(result['N_phi1'])}")
        lines.append(f"N_phi2({result['function']}) = {_fmt(result['N_phi2'])}")
    if "bounded" in result:
        b = result["bounded"]
        lines.append(f"bounded: {b['status']}")
        if b["M"] is not None:
            lines.append(f"  M = {_fmt(b['M'])}, ||g||_1 = {_fmt(b['g_norm'])}, "
                         f"M' = {_fmt(b['M_prime'])}, ||T|| <= {_fmt(b['bound'])}")
        if b["witness"]:
            lines.append(f"  witness: {b['witness']}")
    if "compact" in result:
        lines.append(f"compact: {result['compact']} [{result['rules']['compact']}]")
        for r in result["rules"]["reasons"]:
            lines.append(f"  {r}")
    if "beta" in result:
        lines.append(f"beta: forall = {_fmt(result['beta']['forall'])}, "
                     f"exists = {_fmt(result['beta']['exists'])}")
        for note in result["notes"]:
            lines.append(f"  note: {note}")
    if "oracle" in result:
        o = result["oracle"]
        lines.append(f"oracle ({o['label']}):")
        lines.append(f"  ||T|| >= {_fmt(o['operator_norm']['lower'])} "
                     f"({o['operator_norm']['source']})")
        for k, v in o.get("truncation_distance", {}).items():
            lines.append(f"  ||T - T_{k}|| >= {_fmt(v)}")
        if "witness_separation" in o:
            w = o["witness_separation"]
            lines.append(f"  separation over {w['n']} pieces: min pairwise {_fmt(w['min_pairwise'])}"
                         f", min image norm {_fmt(w['min_image_norm'])}")
    return lines


def run(subcommand, args):
    """Run one subcommand; returns ``(exit_code, result_dict)``."""
    sc = load_scenario(args.scenario)
    body = {"schema": SCHEMA, "scenario": sc.name}
    if sc.commentary:
        body["commentary"] = sc.commentary
    an = _Analysis(sc)
    code = EXIT_OK
    if subcommand == "validate":
        body.update(_validate_section(sc))
        if not body["valid"]:
            code = EXIT_CONFIG
    elif subcommand == "norm":
        expr = args.function if args.function is not None else sc.functions.get("f", "1")
        body.update(_norm_section(sc, expr))
    elif subcommand == "bounded":
        body.update(an.bounded())
    elif subcommand == "compact":
        body.update(an.compact())
    elif subcommand == "essnorm":
        body.update(an.essnorm())
    elif subcommand == "oracle":
        body["oracle"] = _oracle_section(sc, args)
    elif subcommand == "report":
        body.update(an.bounded())
        body.update(an.compact())
        body.update(an.essnorm())
        body["oracle"] = _oracle_section(sc, args)
    return code, body


def build_parser():
    parser = argparse.ArgumentParser(
        prog="orlicz-analyze",
        description="Boundedness, compactness and essential-norm analysis of multiplication "
                    "and composition operators between Orlicz spaces.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--scenario", required=True,
                        help="scenario JSON file, or the name of a shipped demo scenario")
    parser.add_argument("--out", help="write the JSON report to this file")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--trunc", type=int, help="atoms used by the norm oracle")
    parser.add_argument("--samples", type=int, help="random candidates per oracle run")
    parser.add_argument("--keep", type=int, action="append",
                        help="truncation level for the oracle (repeatable)")
    parser.add_argument("--witness-count", type=int, dest="witness_count")
    parser.add_argument("--function", help="expression (or JSON per-channel mapping) for `norm`")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.function is not None and args.function.lstrip().startswith("{"):
        try:
            args.function = json.loads(args.function)
        except json.JSONDecodeError as exc:
            print(f"error: --function: {exc.msg} (col {exc.colno})", file=sys.stderr)
            return EXIT_CONFIG
    try:
        code, body = run(args.subcommand, args)
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    body["meta"] = {"version": __version__,
                    "generated": datetime.now(timezone.utc).isoformat(timespec="seconds")}
    text = json.dumps(jsonable(body), indent=2, allow_nan=False)
    for line in _summary_lines(body):
        print(line)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    elif args.subcommand == "report":
        print(text)
    return code


if __name__ == "__main__":
    sys.exit(main())

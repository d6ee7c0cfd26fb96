"""Command-line front end.

Subcommands: compose | check | simulate | bound | info.

Exit codes:
    0  success / no counterexample found
    1  load, resolution or evaluation error
    2  small-gain condition fails (compose); also argparse usage errors
    3  explicitly supplied composition weights are infeasible
    4  a certificate condition or trajectory bound was violated

CSV output uses '.' decimals, 17 significant digits, comma delimiter and
LF line endings, so repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import config
from .backend import backend_name
from .certify import (
    CompositionWeights,
    compose,
    select_alphas,
    small_gain_ratio,
    validate_alphas,
)
from .errors import BisimError, ModelError, SmallGainError
from .model import Interconnection, Subsystem, as_system, interconnect
from .modelfile import load_model, save_model
from .sim import InputSignal, integrate
from .verify import SampleBox, check_bound, check_cond1, check_cond2

EXIT_OK = 0
EXIT_LOAD = 1
EXIT_SMALL_GAIN = 2
EXIT_BAD_ALPHAS = 3
EXIT_VIOLATION = 4


def _fmt(v: float) -> str:
    return f"{float(v):.17g}"


def _write_csv(path, header, columns):
    rows = zip(*columns)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_json(path, obj):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _alphas_arg(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected two comma-separated numbers")
    return float(parts[0]), float(parts[1])


def _box_arg(text):
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected lo,hi")
    lo, hi = float(parts[0]), float(parts[1])
    if not lo < hi:
        raise argparse.ArgumentTypeError(f"need lo < hi, got {lo},{hi}")
    return lo, hi


def _resolve(table, name, what):
    if name not in table:
        available = ", ".join(sorted(table)) or "(none)"
        raise ModelError(f"unknown {what} '{name}'; available: {available}")
    return table[name]


def _single_certificate_for(model, target_name):
    names = model.certificates_for(target_name)
    if len(names) != 1:
        raise ModelError(
            f"need exactly one certificate targeting '{target_name}', "
            f"found {len(names)}: {sorted(names)}"
        )
    return model.certificates[names[0]][1]


def cmd_compose(args) -> int:
    model = load_model(args.model)
    spec = _resolve(model.interconnections, args.interconnection, "interconnection")
    left = model.subsystems[spec.left]
    right = model.subsystems[spec.right]
    c1 = _single_certificate_for(model, spec.left)
    c2 = _single_certificate_for(model, spec.right)

    ratio = small_gain_ratio(c1, c2)
    print(f"small-gain ratio gamma1*gamma2/(lambda1*lambda2) = {_fmt(ratio)}")
    if ratio >= 1.0:
        print("small-gain condition FAILS (ratio >= 1); cannot compose",
              file=sys.stderr)
        return EXIT_SMALL_GAIN

    explicit = args.alphas if args.alphas is not None else spec.alphas
    if explicit is not None:
        weights = CompositionWeights(*explicit)
        bad = validate_alphas(weights, c1, c2)
        if bad:
            for msg in bad:
                print(msg, file=sys.stderr)
            return EXIT_BAD_ALPHAS
    else:
        weights = select_alphas(c1, c2)

    system = interconnect(Interconnection(left, right))
    cert = compose(c1, c2, weights)
    print(f"alpha1 = {_fmt(weights.alpha1)}, alpha2 = {_fmt(weights.alpha2)}")
    print(f"composed lambda = {_fmt(cert.lam)}, gamma = {_fmt(cert.gamma)}")

    name = args.interconnection
    payload = save_model(
        args.out,
        systems={name: system},
        certificates={f"{name}_certificate": (name, cert)},
    ) if args.out else None
    if payload is None:
        _write_json(None, {
            "systems": {name: {
                "n": system.n, "m": system.m,
                "field": [str(e) for e in system.field],
                "provenance": system.provenance,
            }},
            "certificates": {f"{name}_certificate": {
                "target": name, "V": str(cert.V),
                "lambda": cert.lam, "gamma": cert.gamma,
            }},
        })
    else:
        print(f"wrote composed model to {args.out}")
    return EXIT_OK


def _target_system(model, cert_name):
    target = model.target_of(cert_name)
    if isinstance(target, Subsystem):
        return as_system(target)
    return target


def cmd_check(args) -> int:
    model = load_model(args.model)
    _resolve(model.certificates, args.certificate, "certificate")
    cert = model.certificates[args.certificate][1]
    system = _target_system(model, args.certificate)

    lo, hi = args.box
    box = SampleBox.cube(cert.n, cert.m, lo=lo, hi=hi,
                         n_samples=args.samples, seed=args.seed)
    r1 = check_cond1(cert, box, tol=args.tol)
    r2 = check_cond2(cert, system, box, tol=args.tol)
    passed = r1.passed and r2.passed
    report = {
        "certificate": args.certificate,
        "target": model.certificates[args.certificate][0],
        "backend": backend_name(),
        "samples": args.samples,
        "seed": args.seed,
        "box": [lo, hi],
        "tolerance": args.tol,
        "cond1": r1.to_dict(),
        "cond2": r2.to_dict(),
        "passed": passed,
        "note": (
            f"no counterexample found in {args.samples} samples "
            "(falsification, not proof)" if passed
            else "counterexample found"
        ),
    }
    _write_json(args.out, report)
    return EXIT_OK if passed else EXIT_VIOLATION


def _scenario_pieces(model, name):
    scn = _resolve(model.scenarios, name, "scenario")
    system = model.systems[scn.system]
    sig_u = InputSignal.parse(scn.u, label="u")
    sig_up = InputSignal.parse(scn.up, label="u'")
    return scn, system, sig_u, sig_up


def cmd_simulate(args) -> int:
    model = load_model(args.model)
    scn, system, sig_u, sig_up = _scenario_pieces(model, args.scenario)
    traj = integrate(system, scn.x0, sig_u, scn.h, scn.T)
    traj_p = integrate(system, scn.x0p, sig_up, scn.h, scn.T)

    header = (["t"]
              + [f"x{i}" for i in range(system.n)]
              + [f"u{i}" for i in range(system.m)]
              + [f"xp{i}" for i in range(system.n)]
              + [f"up{i}" for i in range(system.m)])
    columns = [traj.times]
    columns += [traj.states[:, i] for i in range(system.n)]
    columns += [traj.inputs[:, i] for i in range(system.m)]
    columns += [traj_p.states[:, i] for i in range(system.n)]
    columns += [traj_p.inputs[:, i] for i in range(system.m)]
    _write_csv(args.out, header, columns)
    print(f"wrote {len(traj.times)} rows to {args.out}")
    return EXIT_OK


def cmd_bound(args) -> int:
    model = load_model(args.model)
    scn, system, sig_u, sig_up = _scenario_pieces(model, args.scenario)
    _resolve(model.certificates, args.certificate, "certificate")
    target_name, cert = model.certificates[args.certificate]
    if target_name != scn.system:
        raise ModelError(
            f"certificate '{args.certificate}' targets '{target_name}' but "
            f"scenario '{args.scenario}' simulates '{scn.system}'"
        )
    report = check_bound(cert, system, scn.x0, scn.x0p, sig_u, sig_up,
                         scn.h, scn.T, tol=args.tol)

    header = (["t"]
              + [f"x{i}" for i in range(system.n)]
              + [f"xp{i}" for i in range(system.n)]
              + ["norm_gap", "V", "eta"])
    columns = [report.times]
    columns += [report.states[:, i] for i in range(system.n)]
    columns += [report.states_p[:, i] for i in range(system.n)]
    columns += [report.gaps, report.v_values, report.eta]
    _write_csv(args.out, header, columns)

    if report.passed:
        print(f"PASS: bound holds at all {len(report.times)} grid points "
              f"(v0={_fmt(report.v0)}, u_gap={_fmt(report.u_gap)})")
        return EXIT_OK
    v = report.violation
    print(f"FAIL: {v.witness['which']} at t={_fmt(v.time)} "
          f"(lhs={_fmt(v.lhs)}, rhs={_fmt(v.rhs)}, margin={_fmt(v.margin)})")
    return EXIT_VIOLATION


def cmd_info(args) -> int:
    model = load_model(args.model)
    print(f"backend: {backend_name()}")
    for title, table in (
        ("subsystems", model.subsystems),
        ("systems", model.systems),
        ("certificates", model.certificates),
        ("interconnections", model.interconnections),
        ("scenarios", model.scenarios),
    ):
        print(f"{title}:")
        for name in sorted(table):
            entry = table[name]
            if title == "subsystems":
                print(f"  {name}: n={entry.n}, p={entry.p}, q={entry.q}")
            elif title == "systems":
                print(f"  {name}: n={entry.n}, m={entry.m} ({entry.provenance})")
            elif title == "certificates":
                target, cert = entry
                print(f"  {name}: target={target}, lambda={_fmt(cert.lam)}, "
                      f"gamma={_fmt(cert.gamma)}")
            elif title == "interconnections":
                print(f"  {name}: {entry.left} <-> {entry.right}")
            else:
                print(f"  {name}: system={entry.system}, h={entry.h}, T={entry.T}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bisimcert",
        description="Compose and numerically falsify bisimulation-function "
                    "certificates for interconnected ODE systems.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compose", help="compose two subsystem certificates")
    p.add_argument("model")
    p.add_argument("interconnection")
    p.add_argument("--alphas", type=_alphas_arg, default=None,
                   help="explicit weights a1,a2 (default: midpoint rule)")
    p.add_argument("--out", default=None, help="output model file (default stdout)")
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("check", help="sample-falsify both certificate conditions")
    p.add_argument("model")
    p.add_argument("certificate")
    p.add_argument("--samples", type=_positive_int, default=config.DEFAULT_SAMPLES)
    p.add_argument("--seed", type=int, default=config.DEFAULT_SEED)
    p.add_argument("--box", type=_box_arg,
                   default=(config.DEFAULT_BOX_LO, config.DEFAULT_BOX_HI),
                   help="per-dimension sampling interval lo,hi")
    p.add_argument("--tol", type=float, default=config.TOL_COND)
    p.add_argument("--out", default=None, help="JSON report file (default stdout)")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("simulate", help="integrate a scenario's trajectory pair")
    p.add_argument("model")
    p.add_argument("scenario")
    p.add_argument("--out", required=True, help="CSV trace file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bound", help="check the decay envelope along a scenario")
    p.add_argument("model")
    p.add_argument("scenario")
    p.add_argument("certificate")
    p.add_argument("--tol", type=float, default=None,
                   help="bound tolerance (default 1e-4 + 10*h^4)")
    p.add_argument("--out", required=True, help="CSV output file")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("info", help="list the contents of a model file")
    p.add_argument("model")
    p.set_defaults(func=cmd_info)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SmallGainError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_SMALL_GAIN
    except BisimError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_LOAD


if __name__ == "__main__":
    sys.exit(main())

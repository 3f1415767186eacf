"""Command-line entry point: ``hermharm <subcommand> ...``.

Exit codes: 0 success, 1 a numerical check failed, 2 configuration error.
"""

import argparse
import os
import sys

import numpy as np

from . import harness
from .flow import run
from .geometry import GridSpec, MetricError, build_domain, classify_metric
from .maps import energies, residuals
from .targets import SAMPSON_CONDITIONS, SIU_CONDITIONS, ChartError, make_target

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG = 0, 1, 2


def _emit(obj, out=None):
    text = harness.dumps(obj)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    print(text)


def _floats(text):
    return tuple(float(v) for v in text.split(",")) if text else None


def cmd_classify(args):
    if args.scenario:
        cfg = harness.load_scenario(args.scenario)
        dom, _, _ = harness.build_from_scenario(cfg)
    else:
        grid = GridSpec(args.m, args.n, scheme=args.scheme)
        params = {}
        if args.metric == "conformal":
            params = {"amplitude": args.amplitude, "wavevector": _floats(args.wavevector)}
        dom = build_domain(grid, args.metric, **params)
    _emit(classify_metric(dom, args.tol).as_dict(), args.out)
    return EXIT_OK


def cmd_curvature_probe(args):
    target = make_target(args.target, args.n, kappa=args.kappa, margin=args.margin)
    point = np.zeros(args.n) if args.point is None else np.array(_floats(args.point))
    if target.is_kahler and args.point is not None:
        point = point[: args.n] + 1j * point[args.n :] if point.size == 2 * args.n else point.astype(complex)
    conditions = args.condition or (SIU_CONDITIONS if target.is_kahler else SAMPSON_CONDITIONS)
    reports = [harness.curvature_probe_check(target, c, args.samples, args.seed, point) for c in conditions]
    _emit({"target": repr(target), "reports": [r.as_dict() for r in reports]}, args.out)
    return EXIT_OK


def _scenario_objects(path):
    cfg = harness.load_scenario(path)
    dom, target, f = harness.build_from_scenario(cfg)
    return cfg, dom, target, f


def cmd_energy(args):
    _, dom, _, f = _scenario_objects(args.scenario)
    _emit(energies(dom, f).as_dict(), args.out)
    return EXIT_OK


def cmd_residual(args):
    _, dom, _, f = _scenario_objects(args.scenario)
    _emit(residuals(dom, f).as_dict(dom, f.g), args.out)
    return EXIT_OK


def cmd_flow(args):
    cfg, dom, _, f = _scenario_objects(args.scenario)
    fcfg = harness.flow_config(cfg)
    if fcfg is None:
        raise harness.ScenarioError("scenario has no 'flow' section")
    trace = run(dom, f, fcfg)
    if args.csv:
        trace.to_csv(args.csv)
    _emit(trace.summary(), args.out)
    return EXIT_OK


def _report_checks(result):
    for rep in result.reports:
        print(f"{rep.status.upper():8s} {rep.name}", file=sys.stderr)
    _emit(result.summary)
    return EXIT_OK if result.exit_code == 0 else EXIT_CHECK_FAILED


def cmd_verify(args):
    result = harness.run_scenario(args.scenario, args.out_dir, only=args.check, with_flow=args.with_flow)
    return _report_checks(result)


def cmd_run(args):
    result = harness.run_scenario(args.scenario, args.out_dir)
    return _report_checks(result)


def build_parser():
    p = argparse.ArgumentParser(prog="hermharm", description="Harmonic maps on Hermitian tori: checks and flows.")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("classify", help="metric-class report of a domain")
    c.add_argument("scenario", nargs="?", help="scenario file providing the domain")
    c.add_argument("--m", type=int, default=2)
    c.add_argument("--n", type=int, default=16)
    c.add_argument("--scheme", default="fd4")
    c.add_argument("--metric", choices=("flat", "conformal"), default="flat")
    c.add_argument("--amplitude", type=float, default=0.1)
    c.add_argument("--wavevector", help="comma-separated integers, one per real axis")
    c.add_argument("--tol", type=float, default=1e-6)
    c.add_argument("--out")
    c.set_defaults(func=cmd_classify)

    c = sub.add_parser("curvature-probe", help="randomized curvature sign probes of a target")
    c.add_argument("--target", required=True)
    c.add_argument("--n", type=int, default=2)
    c.add_argument("--kappa", type=float)
    c.add_argument("--margin", type=float, default=0.05)
    c.add_argument("--point", help="comma-separated chart point (real then imaginary parts for Kahler)")
    c.add_argument("--condition", action="append", choices=SAMPSON_CONDITIONS + SIU_CONDITIONS)
    c.add_argument("--samples", type=int, default=200)
    c.add_argument("--seed", type=int, default=int(os.environ.get(harness.SEED_ENV, 0)))
    c.add_argument("--out")
    c.set_defaults(func=cmd_curvature_probe)

    for name, func, text in (("energy", cmd_energy, "energies of the scenario map"),
                             ("residual", cmd_residual, "residual norms of the scenario map")):
        c = sub.add_parser(name, help=text)
        c.add_argument("scenario")
        c.add_argument("--out")
        c.set_defaults(func=func)

    c = sub.add_parser("flow", help="run the scenario flow")
    c.add_argument("scenario")
    c.add_argument("--csv", help="write the trace as CSV")
    c.add_argument("--out")
    c.set_defaults(func=cmd_flow)

    c = sub.add_parser("verify", help="run named checks of a scenario")
    c.add_argument("scenario")
    c.add_argument("--check", action="append", help="restrict to this check (repeatable)")
    c.add_argument("--with-flow", action="store_true", help="run the flow section first")
    c.add_argument("--out-dir")
    c.set_defaults(func=cmd_verify)

    c = sub.add_parser("run", help="full scenario: flow, checks, report and CSV")
    c.add_argument("scenario")
    c.add_argument("--out-dir", default=".")
    c.set_defaults(func=cmd_run)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (harness.ScenarioError, MetricError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ChartError as exc:
        print(f"chart error: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    except ValueError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

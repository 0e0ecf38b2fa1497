"""Command line entry point.

Exit status: 0 on success, 1 when a validation check fails, 2 on I/O or
configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from pvarlab.bounds import bound_report
from pvarlab.core import ClassEnvelope, SamplePath
from pvarlab.experiments import (ExperimentConfig, RunManifest, load_config, report_levels,
                                 run_bound_validation, run_membership, run_sharpness)
from pvarlab.kernel import TailGrid
from pvarlab.pvar import dyadic_upper_bound, pvar_exact
from pvarlab.report import _dumps, emit_report
from pvarlab.simulate import MeshSpec, ProcessSpec, simulate_path

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2


class ConfigError(Exception):
    pass


def _floats(s):
    return [float(v) for v in s.split(",") if v.strip()]


def _ints(s):
    return [int(v) for v in s.split(",") if v.strip()]


def _config(args) -> ExperimentConfig:
    base = {}
    if args.config:
        from pvarlab.experiments import parse_config
        try:
            with open(args.config, encoding="utf-8") as fh:
                base = parse_config(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    for key in ("alpha", "c", "T", "n_paths", "a0", "K", "beta", "gamma"):
        v = getattr(args, key, None)
        if v is not None:
            base[key] = v
    for key in ("meshes", "ps", "levels"):
        v = getattr(args, key, None)
        if v is not None:
            base[key] = v
    if args.seed is not None:
        base["seed"] = args.seed
    if args.out is not None:
        base["out"] = args.out
    try:
        return ExperimentConfig.from_dict(base)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _read_path(fname) -> SamplePath:
    data = np.loadtxt(fname, delimiter=",", skiprows=1, ndmin=2)
    return SamplePath(data[:, 0], data[:, 1], float(data[-1, 0]))


def cmd_simulate(args):
    spec = ProcessSpec(args.alpha if args.alpha is not None else 2.0, args.c or 0.5, args.T or 1.0)
    path = simulate_path(spec, MeshSpec(args.n), args.seed or 0)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "path.csv"), "w", encoding="utf-8", newline="\n") as fh:
            path.to_csv(fh)
    else:
        path.to_csv(sys.stdout)
    return EXIT_OK


def cmd_pvar(args):
    path = _read_path(args.input)
    rows = []
    for p in args.ps or [2.0]:
        prof = dyadic_upper_bound(path, p, args.a0 or 1.0)
        rows.append({"p": p, "pvar": pvar_exact(path, p), "profile": prof.to_dict()})
    if args.format == "json":
        sys.stdout.write(_dumps(rows))
    else:
        sys.stdout.write("p,pvar,dyadic_bound,nu0,Mhat\n")
        for r in rows:
            pr = r["profile"]
            sys.stdout.write(f"{r['p']:.17g},{r['pvar']:.17g},{pr['dyadic_bound']:.17g},{pr['nu0']},{pr['Mhat']:.17g}\n")
    return EXIT_OK


def cmd_fit_kernel(args):
    cfg = _config(args)
    grid = None
    if args.grid:
        with open(args.grid, encoding="utf-8") as fh:
            grid = TailGrid.from_csv(fh)
    man = run_membership(cfg, grid)
    emit_report(man, cfg.out, args.format)
    fit = man.fit
    print(f"verdict={fit.verdict} pstar={fit.pstar:.6g} residual={fit.residual:.3g}")
    return EXIT_OK


def cmd_bounds(args):
    env = ClassEnvelope(args.K or 1.0, args.beta or 1.0, args.gamma or 1.0, args.a0 or 1.0)
    levels = args.levels or report_levels(env)
    p = args.ps[-1] if args.ps else None
    rep = bound_report(env, args.T or 1.0, levels, p=p)
    text = _dumps(rep.to_dict())
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "bounds.json"), "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_sharpness(args):
    cfg = _config(args)
    man = run_sharpness(cfg)
    emit_report(man, cfg.out, args.format)
    for p, cls in man.classification.items():
        print(f"p={p:g}: {cls}")
    return EXIT_OK


def cmd_validate(args):
    cfg = _config(args)
    man = run_bound_validation(cfg)
    emit_report(man, cfg.out, args.format)
    for c in man.checks:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: measured={c['measured']:.6g} bound={c['bound']:.6g}")
    return EXIT_OK if man.passed else EXIT_FAIL


def cmd_report(args):
    src = args.manifest or os.path.join(args.out or ".", "manifest.json")
    with open(src, encoding="utf-8") as fh:
        man = RunManifest.from_dict(json.load(fh))
    out = args.out or os.path.dirname(os.path.abspath(src))
    emit_report(man, out, args.format)
    return EXIT_OK if man.passed else EXIT_FAIL


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("-v", "--verbose", action="store_true")

    proc = argparse.ArgumentParser(add_help=False)
    proc.add_argument("--alpha", type=float)
    proc.add_argument("--c", type=float)
    proc.add_argument("--T", type=float)

    exp = argparse.ArgumentParser(add_help=False)
    exp.add_argument("--n-paths", dest="n_paths", type=int)
    exp.add_argument("--meshes", type=_ints)
    exp.add_argument("--ps", type=_floats)
    exp.add_argument("--a0", type=float)

    env = argparse.ArgumentParser(add_help=False)
    env.add_argument("--K", type=float)
    env.add_argument("--beta", type=float)
    env.add_argument("--gamma", type=float)
    env.add_argument("--levels", type=_ints)

    parser = argparse.ArgumentParser(prog="pvarlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common, proc], help="simulate one path to CSV")
    s.add_argument("--n", type=int, default=1025)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("pvar", parents=[common], help="p-variation and dyadic profile of a path CSV")
    s.add_argument("input")
    s.add_argument("--ps", type=_floats)
    s.add_argument("--a0", type=float)
    s.set_defaults(func=cmd_pvar)

    s = sub.add_parser("fit-kernel", parents=[common, proc, exp], help="estimate tail grid and fit envelope")
    s.add_argument("--grid", help="existing tailgrid.csv to fit instead of simulating")
    s.set_defaults(func=cmd_fit_kernel)

    s = sub.add_parser("bounds", parents=[common, env], help="evaluate closed-form bounds")
    s.add_argument("--a0", type=float)
    s.add_argument("--T", type=float)
    s.add_argument("--ps", type=_floats)
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("sharpness", parents=[common, proc, exp], help="p-variation across a mesh ladder")
    s.set_defaults(func=cmd_sharpness)

    s = sub.add_parser("validate", parents=[common, proc, exp, env], help="Monte Carlo bound validation")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("report", parents=[common], help="re-render outputs from a manifest.json")
    s.add_argument("--manifest")
    s.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())

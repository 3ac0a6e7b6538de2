"""Command-line interface.

Exit codes: 0 success, 1 configuration/model/solver error, 2 pathwise
duality counterexample found, 3 per-horizon identity rejected.
"""

import argparse
import json
import os
import platform
import sys
import time

import numpy as np

from . import __version__
from .corpus import KINDS, duality_corpus
from .exceptions import OrthantRuinError
from .models import build_model
from .orthant import build_reflection
from .report import build_claims_report, capital_sweep, dumps, table_csv
from .skorokhod import STRICT_TOL, solve_sp
from .storage import duality_verdict, reverse_inputs, solve_storage
from .streams import derive_stream
from .config import load_config

EXIT_OK, EXIT_ERROR, EXIT_COUNTEREXAMPLE, EXIT_IDENTITY = 0, 1, 2, 3
METHODS = {"direct": ("direct",), "storage": ("storage",), "ladder": ("ladder",),
           "all": ("direct", "storage", "ladder")}


def _fail(exc):
    payload = exc.to_dict() if isinstance(exc, OrthantRuinError) else {"error": type(exc).__name__, "message": str(exc)}
    sys.stderr.write(json.dumps(payload, default=str) + "\n")
    return EXIT_ERROR


def _write(path, text):
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _setup(path):
    cfg = load_config(path)
    refl = build_reflection(cfg.P)
    model, report = build_model(cfg.model, refl)
    return cfg, refl, model, report


def cmd_validate(args):
    try:
        _, refl, _, report = _setup(args.config)
    except (OrthantRuinError, ValueError) as exc:
        return _fail(exc)
    sys.stdout.write(dumps({"matrix": refl.summary(), **report.to_dict()}))
    return EXIT_OK


def cmd_simulate_path(args):
    try:
        cfg, refl, model, _ = _setup(args.config)
        seed = cfg.settings.seed if args.seed is None else args.seed
        u = model.sample_increments(derive_stream(seed, 0, "path"), args.n)
        primal = solve_sp(cfg.initial_capital, u, refl)
        dual = solve_storage(reverse_inputs(u, refl), refl)
        verdict = duality_verdict(cfg.initial_capital, u, refl, cfg.settings.strict_tol)
    except (OrthantRuinError, ValueError) as exc:
        return _fail(exc)
    out = args.dump or cfg.output_dir
    _write(os.path.join(out, "primal_path.csv"), primal.to_csv())
    _write(os.path.join(out, "dual_path.csv"), dual.to_csv())
    _write(os.path.join(out, "duality_verdict.json"), dumps(verdict.to_dict()))
    sys.stdout.write(dumps({"n": args.n, "seed": seed, "passed": verdict.passed,
                            "failures": verdict.failures(), "dir": out}))
    return EXIT_OK


def cmd_duality_check(args):
    strict_tol = args.strict_tol
    if args.config:
        try:
            cfg = load_config(args.config)
        except (OrthantRuinError, ValueError) as exc:
            return _fail(exc)
        if strict_tol is None:
            strict_tol = cfg.settings.strict_tol
    summary = duality_corpus(args.instances, dmax=args.dmax, nmax=args.nmax, seed=args.seed, kind=args.kind,
                             strict_tol=STRICT_TOL if strict_tol is None else strict_tol)
    sys.stdout.write(dumps({**summary.to_dict(), "seconds": round(summary.seconds, 3)}))
    return EXIT_OK if summary.total_failures == 0 else EXIT_COUNTEREXAMPLE


def _parse_sweep(text):
    try:
        lo, hi, step = (float(x) for x in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("sweep must look like START:STOP:STEP") from None
    if step <= 0 or hi < lo or lo < 0:
        raise argparse.ArgumentTypeError("sweep needs 0 <= START <= STOP and STEP > 0")
    return np.arange(lo, hi + step / 2, step).tolist()


def cmd_estimate(args):
    start = time.perf_counter()
    try:
        cfg, refl, model, hyp = _setup(args.config)
        settings = cfg.settings
        if args.n_jobs is not None:
            settings.n_jobs = args.n_jobs
        report = build_claims_report(model, hyp, cfg.initial_capital, settings, METHODS[args.method])
        sweep = capital_sweep(model, args.sweep, settings) if args.sweep else None
    except (OrthantRuinError, ValueError) as exc:
        return _fail(exc)
    out = args.out or cfg.output_dir
    if "json" in cfg.formats:
        _write(os.path.join(out, "claims_report.json"), report.to_json())
    if "csv" in cfg.formats:
        _write(os.path.join(out, "per_horizon_identity.csv"), report.identity_csv())
        _write(os.path.join(out, "sigma_bd_survival.csv"), report.sigma_bd_csv())
        if sweep is not None:
            _write(os.path.join(out, "capital_sweep.csv"),
                   table_csv(sweep, ["t", "direct", "direct_se", "storage", "storage_se"]))
    meta = {"version": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "argv": sys.argv[1:], "n_jobs": settings.n_jobs, "started": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
            "seconds": round(time.perf_counter() - start, 3)}
    _write(os.path.join(out, "run_metadata.json"), json.dumps(meta, indent=2) + "\n")
    sys.stdout.write(dumps({"verdicts": report.verdicts(), "dir": out}))
    return EXIT_IDENTITY if report.identity_failed else EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="orthant-ruin", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check the matrix and model hypotheses")
    p.add_argument("config")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate-path", help="simulate one path, its reversed dual and the duality verdict")
    p.add_argument("config")
    p.add_argument("--n", type=int, default=20, help="number of steps")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--dump", default=None, help="output directory (default: config output.dir)")
    p.set_defaults(func=cmd_simulate_path)

    p = sub.add_parser("duality-check", help="randomized pathwise duality corpus")
    p.add_argument("config", nargs="?", default=None)
    p.add_argument("--instances", type=int, default=100_000)
    p.add_argument("--dmax", type=int, default=5)
    p.add_argument("--nmax", type=int, default=40)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--kind", choices=KINDS, default="continuous")
    p.add_argument("--strict-tol", type=float, default=None)
    p.set_defaults(func=cmd_duality_check)

    p = sub.add_parser("estimate", help="Monte Carlo estimates and the claims report")
    p.add_argument("config")
    p.add_argument("--method", choices=sorted(METHODS), default="all")
    p.add_argument("--sweep", type=_parse_sweep, default=None, metavar="START:STOP:STEP",
                   help="capital sweep a = (t, ..., t)")
    p.add_argument("--n-jobs", type=int, default=None)
    p.add_argument("--out", default=None, help="output directory (default: config output.dir)")
    p.set_defaults(func=cmd_estimate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

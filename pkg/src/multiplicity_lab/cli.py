"""Command line: run bundled or custom experiments, re-verify reports, and
call the brute-force oracles directly.

Exit codes: 0 pass, 1 check failure, 2 usage or config error.
"""

import argparse
import json
import logging
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import experiments
from .errors import ConfigError, LabError

log = logging.getLogger("multiplicity_lab")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _threads(n):
    if n and n > 0:
        for var in ("NUMBA_NUM_THREADS", "OMP_NUM_THREADS"):
            os.environ.setdefault(var, str(n))
    return max(1, int(n or 1))


def cmd_run(args):
    cfg = experiments.load_config(args.config)
    out_dir = Path(args.out or cfg.get("output_dir") or Path("runs") / cfg["name"])
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out_dir}: {exc}") from exc
    t0 = time.perf_counter()
    report, artifacts = experiments.run_config(cfg, args.seed, args.budget_scale, _threads(args.threads))
    elapsed = time.perf_counter() - t0
    path = out_dir / f"{cfg['name']}.report.json"
    try:
        path.write_text(experiments.dumps(report))
        experiments.write_state_artifacts(artifacts, out_dir)
        # timings live apart from the report so reruns stay byte-identical
        (out_dir / f"{cfg['name']}.timings.json").write_text(json.dumps({"seconds": elapsed}) + "\n")
    except OSError as exc:
        raise ConfigError(f"cannot write to {out_dir}: {exc}") from exc
    for name, ok in report["checks"].items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    for w in report["warnings"]:
        print(f"WARN  {w}")
    print(f"report: {path} ({elapsed:.2f} s)")
    return EXIT_OK if report["passed"] else EXIT_FAIL


def cmd_verify(args):
    try:
        report = json.loads(Path(args.report).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read report {args.report}: {exc}") from exc
    res = experiments.verify_report(report)
    for row in res["witnesses"]:
        print(f"{'PASS' if row['ok'] else 'FAIL'}  {row['type']}: {row['note']}")
    for w in res["warnings"]:
        print(f"WARN  {w}")
    print("verified" if res["ok"] else "verification failed")
    return EXIT_OK if res["ok"] else EXIT_FAIL


def cmd_list(args):
    for name in experiments.bundled_names():
        cfg = experiments.load_config(name)
        print(f"{name:20s} {cfg['kind']:16s} {cfg.get('description', '')}")
    return EXIT_OK


def cmd_oracle(args):
    from . import chebyshev, three_solutions
    from .functions import functional

    if args.oracle == "scalar-roots":
        J = functional(args.J, 1)
        interval = tuple(args.interval) if args.interval else None
        res = three_solutions.scalar_three_roots(J, args.a, args.b, interval)
        print(json.dumps({"count": res.count, "roots": res.roots, "interval": res.interval}))
        return EXIT_OK
    if args.oracle == "double-min":
        cfg = experiments.load_config(args.config)
        X, psi, _, phi, _ = experiments._chebyshev_inputs(cfg["params"])
        ver = chebyshev.verify_double_minimum(np.asarray(args.y0, dtype=float), psi, X, phi)
        print(json.dumps(experiments.clean({
            "clusters": [{"representative": c.representative, "value": c.value} for c in ver.clusters],
            "objective_min": ver.objective_min,
        })))
        return EXIT_OK if ver.ok else EXIT_FAIL
    if args.oracle == "gap":
        grid = {"x": {"range": args.x_range, "n": args.nx}, "y": {"range": args.y_range, "n": args.ny}}
        print(json.dumps(experiments.gap_on_grid(args.f, grid).to_dict()))
        return EXIT_OK
    raise ConfigError(f"unknown oracle {args.oracle!r}")


def build_parser():
    ap = argparse.ArgumentParser(prog="multiplicity-lab", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a config file or a bundled experiment")
    run.add_argument("config")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--out", default=None)
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--budget-scale", type=float, default=None)
    run.set_defaults(fn=cmd_run)

    ver = sub.add_parser("verify", help="re-run the oracle checks on a report")
    ver.add_argument("report")
    ver.set_defaults(fn=cmd_verify)

    lst = sub.add_parser("list", help="list bundled experiments")
    lst.set_defaults(fn=cmd_list)

    orc = sub.add_parser("oracle", help="brute-force tools")
    osub = orc.add_subparsers(dest="oracle", required=True)
    sr = osub.add_parser("scalar-roots", help="roots of x + a J'(x) = b by bisection")
    sr.add_argument("--J", default="sin")
    sr.add_argument("--a", type=float, required=True)
    sr.add_argument("--b", type=float, required=True)
    sr.add_argument("--interval", type=float, nargs=2)
    dm = osub.add_parser("double-min", help="count global minima at y0 for a chebyshev config")
    dm.add_argument("--config", required=True)
    dm.add_argument("--y0", type=float, nargs="+", required=True)
    gp = osub.add_parser("gap", help="discrete sup-inf and inf-sup of f(x, y)")
    gp.add_argument("--f", required=True)
    gp.add_argument("--x-range", type=float, nargs=2, required=True)
    gp.add_argument("--y-range", type=float, nargs=2, required=True)
    gp.add_argument("--nx", type=int, default=101)
    gp.add_argument("--ny", type=int, default=101)
    orc.set_defaults(fn=cmd_oracle)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LabError as exc:
        print(f"check failure: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())

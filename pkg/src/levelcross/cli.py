"""Command line front end.

    levelcross run --config cfg.json [--seed N] [--threads K]
                   [--output DIR] [--allow-large]
    levelcross figures (--config cfg.json | --output DIR)
    levelcross energy-table --output DIR [--tol T] [--points K] [--qmax Q]
    levelcross validate-config --config cfg.json

Exit codes: 0 all verdicts PASS, 2 statistical FAIL, 1 execution error.
The LEVELCROSS_OUTPUT environment variable supplies the default output
directory when neither the config nor --output names one.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

# keep worker math single threaded unless the user says otherwise;
# must happen before numpy is first imported
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="levelcross",
        description="Monte Carlo experiments on level crossings of "
                    "random matrix pencils")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute an experiment config")
    run.add_argument("--config", required=True)
    run.add_argument("--seed", type=int, default=None,
                     help="override master_seed")
    run.add_argument("--threads", type=int, default=None,
                     help="worker processes (outputs are identical "
                          "regardless)")
    run.add_argument("--output", default=None, help="override output_dir")
    run.add_argument("--allow-large", action="store_true", default=None,
                     help="lift the n <= 25 desk-scale cap")

    fig = sub.add_parser("figures", help="re-render figures for a "
                                         "finished run")
    fig.add_argument("--config", default=None)
    fig.add_argument("--output", default=None)

    et = sub.add_parser("energy-table", help="tabulate the elliptic-family "
                                             "log energy")
    et.add_argument("--output", default=None)
    et.add_argument("--tol", type=float, default=1e-3)
    et.add_argument("--points", type=int, default=39)
    et.add_argument("--qmax", type=float, default=0.95)

    val = sub.add_parser("validate-config", help="check a config file")
    val.add_argument("--config", required=True)
    return p


def _cmd_run(args) -> int:
    from .experiments import load_config, resolve_config, run

    cfg = load_config(args.config)
    cfg = resolve_config(cfg, master_seed=args.seed, threads=args.threads,
                         output_dir=args.output,
                         allow_large=args.allow_large)
    record = run(cfg)
    for c in record.checks:
        state = ("REPORTED" if c["pass"] is None
                 else "PASS" if c["pass"] else "FAIL")
        bound = "" if c["bound"] is None else f" (bound {c['bound']:g})"
        print(f"  {state:8s} {c['name']} = {c['value']:.6g}{bound}")
    print(f"{record.verdict}: {record.config['experiment']} -> "
          f"{record.output_dir}")
    return 0 if record.verdict == "PASS" else 2


def _cmd_figures(args) -> int:
    from .experiments import load_config, load_record
    from .figures import emit_figures

    if args.output:
        out = args.output
    elif args.config:
        out = load_config(args.config)["output_dir"]
    else:
        print("figures: need --config or --output", file=sys.stderr)
        return 1
    record = load_record(out)
    for path in emit_figures(record):
        print(path)
    return 0


def _cmd_energy_table(args) -> int:
    import numpy as np

    from .laws import build_energy_table

    out = args.output or os.environ.get("LEVELCROSS_OUTPUT", ".")
    os.makedirs(out, exist_ok=True)
    table = build_energy_table(np.linspace(0.0, args.qmax, args.points),
                               args.tol)
    path = os.path.join(out, "energy_table.csv")
    table.to_csv(path)
    print(path)
    return 0


def _cmd_validate(args) -> int:
    from .experiments import config_hash, load_config

    cfg = load_config(args.config)
    print(json.dumps(cfg, indent=2, sort_keys=True))
    print(f"OK {config_hash(cfg)}")
    return 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handler = {
        "run": _cmd_run,
        "figures": _cmd_figures,
        "energy-table": _cmd_energy_table,
        "validate-config": _cmd_validate,
    }[args.command]
    try:
        return handler(args)
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

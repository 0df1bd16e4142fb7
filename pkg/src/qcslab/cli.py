"""qcslab command line: run experiment configs, summarize and verify runs,
and generate task fixtures."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiments, tasks


def _cmd_run(args) -> int:
    config = json.loads(Path(args.config).read_text())
    out = Path(args.out or config.get("out") or f"runs/{config['recipe']}")
    experiments.run_experiment(config, out)
    print(f"wrote {out / 'results.csv'}")
    return 0


def _cmd_summarize(args) -> int:
    out = experiments.summarize(args.rundir)
    print(f"wrote {out}")
    return 0


def _cmd_verify(args) -> int:
    problems = experiments.verify(args.rundir)
    for p in problems:
        print(f"FAIL: {p}")
    if not problems:
        print("ok: all invariant audits passed")
    return 1 if problems else 0


def _cmd_gen_task(args) -> int:
    generators = {
        "region": lambda s: tasks.gen_region_task(args.regions, args.equal_delta, s)[1],
        "logspirals": lambda s: tasks.gen_logspirals(args.classes, args.n, args.noise, s),
        "xor": lambda s: tasks.gen_xor_points(args.eta),
        "spirals": lambda s: tasks.gen_spirals(args.n, args.noise, seed=s),
        "circles": lambda s: tasks.gen_circles(args.n, args.noise, seed=s),
        "spatiotemporal": lambda s: tasks.gen_spatiotemporal(args.channels, seed=s),
    }
    if args.name not in generators:
        print(f"unknown task {args.name!r}; choose from {sorted(generators)}")
        return 2
    ds = generators[args.name](args.seed)
    out = Path(args.out or f"{args.name}_seed{args.seed}.csv")
    tasks.export_dataset(ds, out)
    print(f"wrote {out} (+ sidecar)")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="qcslab")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config (JSON)")
    p_run.add_argument("config")
    p_run.add_argument("--out")
    p_run.set_defaults(fn=_cmd_run)

    p_sum = sub.add_parser("summarize", help="per-configuration summary of a run dir")
    p_sum.add_argument("rundir")
    p_sum.set_defaults(fn=_cmd_summarize)

    p_ver = sub.add_parser("verify", help="re-check invariants on stored outputs")
    p_ver.add_argument("rundir")
    p_ver.set_defaults(fn=_cmd_verify)

    p_gen = sub.add_parser("gen-task", help="generate a task dataset CSV")
    p_gen.add_argument("name")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out")
    p_gen.add_argument("--n", type=int, default=500)
    p_gen.add_argument("--noise", type=float, default=0.05)
    p_gen.add_argument("--regions", type=int, default=6)
    p_gen.add_argument("--equal-delta", action="store_true")
    p_gen.add_argument("--classes", type=int, default=2)
    p_gen.add_argument("--eta", type=float, default=1.0)
    p_gen.add_argument("--channels", type=int, default=3)
    p_gen.set_defaults(fn=_cmd_gen_task)

    args = parser.parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())

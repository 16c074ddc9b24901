"""Command-line entry point: ``ibo run|bench|ablate|sweep-init``.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from .experiments import ALGORITHMS, ConfigError, ExperimentConfig, load_config, run_experiment

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def parse_phi_grid(text: str) -> list[float]:
    """``a:b:step`` (inclusive of b) or a comma-separated list."""
    if ":" in text:
        try:
            a, b, step = map(float, text.split(":"))
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad grid {text!r}, expected a:b:step") from None
        if step <= 0 or b < a:
            raise argparse.ArgumentTypeError("grid needs step > 0 and b >= a")
        n = int(np.floor((b - a) / step + 1e-9)) + 1
        return [round(a + i * step, 12) for i in range(n)]
    try:
        return [float(t) for t in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}") from None


def _common(p: argparse.ArgumentParser, default_seeds: int = 1):
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, default=None, help="root seed (default 0)")
    p.add_argument("--seeds", type=int, default=default_seeds, help="number of replications")
    p.add_argument("--jobs", type=int, default=1, help="parallel replications")
    p.add_argument("--ibo", type=json.loads, default=None, metavar="JSON",
                   help="IBO config overrides, e.g. '{\"m\": 30}'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ibo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a JSON config file")
    run.add_argument("config")
    run.add_argument("--out")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--jobs", type=int, default=None)

    bench = sub.add_parser("bench", help="run one algorithm on a benchmark or the SEIR problem")
    bench.add_argument("name", choices=["eggholder", "rosenbrock", "mccormick", "seir"])
    bench.add_argument("--algo", choices=ALGORITHMS, default="ibo")
    bench.add_argument("--budget", type=int, default=None)
    _common(bench, default_seeds=5)

    ablate = sub.add_parser("ablate", help="kernel or acquisition ablation on the SEIR problem")
    ablate.add_argument("what", choices=["kernels", "acquisitions"])
    _common(ablate, default_seeds=20)

    sweep = sub.add_parser("sweep-init", help="initial-constant sensitivity sweep")
    sweep.add_argument("--phi-grid", type=parse_phi_grid, default="0:1:0.25")
    sweep.add_argument("--algos", nargs="+", choices=ALGORITHMS, default=["ibo", "pso", "random"])
    _common(sweep, default_seeds=1)
    return parser


def config_from_args(args) -> ExperimentConfig:
    if args.command == "run":
        cfg = load_config(args.config)
        raw = cfg.to_dict()
        if args.seed is not None:
            raw.pop("seeds")
            raw["root_seed"] = args.seed
        if args.out:
            raw["output_dir"] = args.out
        if args.jobs:
            raw["jobs"] = args.jobs
        return ExperimentConfig.from_dict(raw)

    raw: dict = {"replications": args.seeds, "root_seed": args.seed or 0, "jobs": args.jobs}
    if args.ibo:
        raw["ibo"] = args.ibo
    if args.command == "bench":
        raw.update(experiment="seir" if args.name == "seir" else "benchmark",
                   problem={"name": args.name}, algorithm=args.algo)
        if args.budget is not None:
            raw["budget"] = args.budget
        default_out = f"runs/bench_{args.name}_{args.algo}"
    elif args.command == "ablate":
        kind = "kernel_ablation" if args.what == "kernels" else "acquisition_ablation"
        raw.update(experiment=kind, problem={"name": "seir"})
        default_out = f"runs/{kind}"
    else:
        raw.update(experiment="initial_condition_sweep", problem={"name": "seir"},
                   phi_grid=args.phi_grid, algorithms=args.algos)
        default_out = "runs/initial_condition_sweep"
    raw["output_dir"] = args.out or default_out
    return ExperimentConfig.from_dict(raw)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        config = config_from_args(args)
    except (ConfigError, OSError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        summary = run_experiment(config)
    except Exception as err:  # noqa: BLE001 - any failure maps to the runtime exit code
        print(f"run failed: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    for label, agg in summary.aggregates().items():
        print(f"{label:>14}  n={agg['n']:<3d} mean={agg['mean']:.6g}  median={agg['median']:.6g}  "
              f"min={agg['min']:.6g}  max={agg['max']:.6g}")
    print(f"artifacts written to {config.output_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

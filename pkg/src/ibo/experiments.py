"""Seeded experiment campaigns, artifact files, and plot-data emission.

Every campaign is a list of independent tasks (one per seed, or per seed and
initial constant). Each task writes its own trace files; the summary is
written once all tasks finish. Artifacts embed the config and seed that
produced them.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import jsonschema
import numpy as np

from .baselines import PsoConfig, pso, random_search
from .benchmarks import get_benchmark
from .engine import IboConfig, IterationRecord, OptimizationError, OptimizationResult, Phase, optimize
from .epidemic import EpidemicParams, make_objective_handle
from .gp import KernelFamily
from .acquisition import AcquisitionKind
from .objective import ObjectiveHandle

logger = logging.getLogger(__name__)

EXPERIMENT_KINDS = ("benchmark", "seir", "kernel_ablation", "acquisition_ablation",
                    "baseline_comparison", "initial_condition_sweep")
ALGORITHMS = ("ibo", "standard-bo", "pso", "random")
TRACE_COLUMNS = ("iteration", "phase", "objective", "best_so_far", "distance_prev",
                 "acq_score", "wall_time_s")
PLOT_COLUMNS = ("iteration", "phase", "n_traces", "objective", "best_so_far", "distance_prev")
DEFAULT_BUDGET = 500


class ConfigError(ValueError):
    pass


class ExperimentRuntimeError(RuntimeError):
    pass


def config_schema() -> dict:
    return json.loads(resources.files("ibo").joinpath("config_schema.json").read_text())


@dataclass
class ExperimentConfig:
    experiment: str
    problem: dict = field(default_factory=lambda: {"name": "seir"})
    algorithm: str = "ibo"
    algorithms: list | None = None
    ibo: dict = field(default_factory=dict)
    pso: dict = field(default_factory=dict)
    budget: int | None = None
    kernels: list | None = None
    acquisitions: list | None = None
    phi_grid: list | None = None
    replications: int = 1
    seeds: list | None = None
    root_seed: int = 0
    output_dir: str = "runs"
    jobs: int = 1

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        try:
            jsonschema.validate(raw, config_schema())
        except jsonschema.ValidationError as err:
            where = "/".join(map(str, err.absolute_path)) or "<root>"
            raise ConfigError(f"field {where}: {err.message}") from None
        if "seeds" in raw and "replications" in raw and raw["replications"] != len(raw["seeds"]):
            raise ConfigError("field replications: does not match the length of seeds")
        cfg = cls(**raw)
        cfg._check()
        return cfg

    def _check(self):
        name = self.problem.get("name", "seir")
        if self.experiment == "benchmark" and name == "seir":
            raise ConfigError("field problem/name: benchmark experiments need a benchmark problem")
        if self.experiment == "seir" and name != "seir":
            raise ConfigError("field problem/name: seir experiments need problem 'seir'")
        try:
            IboConfig(**self.ibo)
        except (TypeError, ValueError) as err:
            raise ConfigError(f"field ibo: {err}") from None
        try:
            PsoConfig(**self.pso)
        except (TypeError, ValueError) as err:
            raise ConfigError(f"field pso: {err}") from None
        if name == "seir":
            try:
                EpidemicParams(**self.problem.get("seir", {}))
            except (TypeError, ValueError) as err:
                raise ConfigError(f"field problem/seir: {err}") from None
        if self.phi_grid is not None:
            lo, hi = self.problem.get("bounds", (0.0, 1.0))
            bad = [p for p in self.phi_grid if not lo <= p <= hi]
            if bad:
                raise ConfigError(f"field phi_grid: values {bad} outside bounds [{lo}, {hi}]")

    def __post_init__(self):
        if self.seeds is not None:
            self.replications = len(self.seeds)

    def seed_list(self) -> list[int]:
        if self.seeds is not None:
            return list(self.seeds)
        return [self.root_seed + i for i in range(self.replications)]

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if v is not None}
        d["seeds"] = self.seed_list()
        d["replications"] = len(d["seeds"])
        return d


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: line {err.lineno} column {err.colno}: {err.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    return ExperimentConfig.from_dict(raw)


def save_config(config: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n")


def make_handle(problem: dict) -> ObjectiveHandle:
    name = problem.get("name", "seir")
    if name == "seir":
        params = EpidemicParams(**problem.get("seir", {}))
        return make_objective_handle(params, tuple(problem.get("bounds", (0.0, 1.0))))
    return get_benchmark(name).handle()


# ---------------------------------------------------------------- traces


def write_trace(records: Sequence[IterationRecord], path, meta: dict | None = None) -> Path:
    """CSV trace plus a JSON sidecar (same stem) holding ``meta``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(TRACE_COLUMNS)
        for r in records:
            w.writerow([r.index, r.phase.value, repr(r.objective), repr(r.best_so_far),
                        repr(r.distance_prev), repr(r.acq_score), repr(r.wall_time)])
    if meta is not None:
        path.with_suffix(".json").write_text(json.dumps(meta, indent=2, default=_jsonable) + "\n")
    return path


def read_trace(path) -> dict[str, list]:
    cols: dict[str, list] = {c: [] for c in TRACE_COLUMNS}
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            cols["iteration"].append(int(row["iteration"]))
            cols["phase"].append(row["phase"])
            for c in TRACE_COLUMNS[2:]:
                cols[c].append(float(row[c]))
    return cols


def emit_plot_data(traces: Sequence[Sequence[IterationRecord]], path) -> Path:
    """Column-oriented plot data, averaged across traces row by row.

    Row ``i`` averages record ``i`` of every trace that has one; ``n_traces``
    says how many did. The phase is taken from the first such trace.
    """
    traces = [list(t) for t in traces]
    if not traces:
        raise ValueError("no traces to emit")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    length = max(len(t) for t in traces)
    lines = ["# " + " ".join(PLOT_COLUMNS)]
    for i in range(length):
        rows = [t[i] for t in traces if len(t) > i]
        lines.append(" ".join([
            str(i),
            rows[0].phase.value,
            str(len(rows)),
            repr(float(np.mean([r.objective for r in rows]))),
            repr(float(np.mean([r.best_so_far for r in rows]))),
            repr(float(np.mean([r.distance_prev for r in rows]))),
        ]))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_plot_data(path) -> dict[str, list]:
    lines = Path(path).read_text().splitlines()
    header = lines[0].lstrip("#").split()
    cols: dict[str, list] = {c: [] for c in header}
    for line in lines[1:]:
        for c, tok in zip(header, line.split()):
            cols[c].append(tok if c == "phase" else (int(tok) if c in ("iteration", "n_traces")
                                                    else float(tok)))
    return cols


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, Phase):
        return o.value
    raise TypeError(f"cannot serialize {type(o)}")


# ------------------------------------------------------------- campaigns


@dataclass(frozen=True)
class RunRow:
    label: str
    algorithm: str
    seed: int
    phi: float | None
    best_value: float
    evaluations: int
    fd_evaluations: int
    wall_time_s: float
    best_point: tuple


@dataclass
class RunSummary:
    rows: list[RunRow]

    def labels(self) -> list[str]:
        return list(dict.fromkeys(r.label for r in self.rows))

    def aggregates(self) -> dict[str, dict]:
        out = {}
        for label in self.labels():
            vals = np.array([r.best_value for r in self.rows if r.label == label])
            times = np.array([r.wall_time_s for r in self.rows if r.label == label])
            out[label] = {
                "n": int(vals.size),
                "mean": math.fsum(vals) / vals.size,  # order-independent
                "median": float(np.median(vals)),
                "min": float(np.min(vals)),
                "max": float(np.max(vals)),
                "mean_wall_time_s": math.fsum(times) / times.size,
            }
        return out


@dataclass(frozen=True)
class _Task:
    labels: tuple  # one per algorithm
    algorithms: tuple
    seed: int
    phi: float | None
    ibo: dict
    parity: bool


def _plan(cfg: ExperimentConfig) -> list[_Task]:
    seeds = cfg.seed_list()
    kind = cfg.experiment
    tasks = []
    if kind in ("benchmark", "seir"):
        for s in seeds:
            tasks.append(_Task((cfg.algorithm,), (cfg.algorithm,), s, None, {}, False))
    elif kind == "kernel_ablation":
        for kern in cfg.kernels or [k.value for k in KernelFamily]:
            for s in seeds:
                tasks.append(_Task((kern,), ("ibo",), s, None, {"kernel": kern}, False))
    elif kind == "acquisition_ablation":
        for acq in cfg.acquisitions or [a.value for a in AcquisitionKind]:
            for s in seeds:
                tasks.append(_Task((acq,), ("ibo",), s, None, {"acquisition": acq}, False))
    elif kind == "baseline_comparison":
        algos = _ibo_first(cfg.algorithms or list(ALGORITHMS))
        for s in seeds:
            tasks.append(_Task(algos, algos, s, None, {}, True))
    elif kind == "initial_condition_sweep":
        algos = _ibo_first(cfg.algorithms or ["ibo", "pso", "random"])
        for phi in cfg.phi_grid or [0.0, 0.25, 0.5, 0.75, 1.0]:
            for s in seeds:
                tasks.append(_Task(algos, algos, s, float(phi), {}, True))
    else:
        raise ConfigError(f"field experiment: unknown kind {kind!r}")
    return tasks


def _ibo_first(algos) -> tuple:
    algos = list(dict.fromkeys(algos))
    if "ibo" in algos:
        algos.remove("ibo")
        algos.insert(0, "ibo")
    return tuple(algos)


def run_algorithm(algorithm: str, handle: ObjectiveHandle, seed: int, ibo: dict | None = None,
                  pso_cfg: dict | None = None, budget: int | None = None,
                  initial_point=None) -> OptimizationResult:
    """Runs one named algorithm with its own generator seeded by ``seed``."""
    rng = np.random.default_rng(seed)
    ibo = dict(ibo or {})
    if initial_point is not None:
        initial_point = tuple(map(float, initial_point))
    if algorithm in ("ibo", "standard-bo"):
        config = IboConfig(**{**ibo, "seed": seed, "initial_point": initial_point})
        if algorithm == "standard-bo":
            config = replace(config, n=1, local_phase=False)
            if budget is not None:
                config = replace(config, m=max(1, math.ceil((budget - config.j0) / config.l)))
        return optimize(handle, config, rng)
    if algorithm == "pso":
        config = PsoConfig(**{**(pso_cfg or {}), "seed": seed, "initial_point": initial_point})
        return pso(handle, config, rng, budget=budget or DEFAULT_BUDGET)
    if algorithm == "random":
        return random_search(handle, budget or DEFAULT_BUDGET, rng, initial_point, seed)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def _stem(label: str, seed: int, phi: float | None) -> str:
    return f"{label}_seed{seed}" if phi is None else f"{label}_phi{phi:g}_seed{seed}"


def _run_task(cfg_dict: dict, task: _Task) -> list[tuple[RunRow, list]]:
    cfg = ExperimentConfig(**{k: v for k, v in cfg_dict.items()})
    out_dir = Path(cfg.output_dir) / "traces"
    ibo = {**cfg.ibo, **task.ibo}
    budget = cfg.budget
    results = []
    for label, algo in zip(task.labels, task.algorithms):
        handle = make_handle(cfg.problem)
        x0 = None if task.phi is None else np.full(handle.dim, task.phi)
        stem = _stem(label, task.seed, task.phi)
        try:
            res = run_algorithm(algo, handle, task.seed, ibo, cfg.pso, budget, x0)
        except OptimizationError as err:
            write_trace(err.trace, out_dir / f"{stem}.partial.csv",
                        {"config": cfg_dict, "seed": task.seed, "error": str(err)})
            raise ExperimentRuntimeError(f"{stem}: {err}") from err
        if task.parity and algo == "ibo":
            budget = res.n_evaluations
        meta = {
            "config": cfg_dict, "algorithm": algo, "label": label, "seed": task.seed,
            "phi": task.phi, "algorithm_config": res.config, "best_value": res.best_value,
            "best_point": res.best_point, "evaluations": res.n_evaluations,
            "fd_evaluations": res.n_fd_evaluations, "wall_time_s": res.wall_time,
            "local_aborted": res.local_aborted,
        }
        write_trace(res.trace, out_dir / f"{stem}.csv", meta)
        row = RunRow(label, algo, task.seed, task.phi, res.best_value, res.n_evaluations,
                     res.n_fd_evaluations, res.wall_time, tuple(map(float, res.best_point)))
        results.append((row, res.trace))
    return results


def write_summary(summary: RunSummary, out_dir, cfg_dict: dict) -> None:
    out_dir = Path(out_dir)
    with (out_dir / "summary.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "algorithm", "seed", "phi", "best_value", "evaluations",
                    "fd_evaluations", "best_point"])
        for r in summary.rows:
            w.writerow([r.label, r.algorithm, r.seed, "" if r.phi is None else repr(r.phi),
                        repr(r.best_value), r.evaluations, r.fd_evaluations,
                        json.dumps(list(r.best_point))])
    with (out_dir / "timings.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["label", "seed", "phi", "wall_time_s"])
        for r in summary.rows:
            w.writerow([r.label, r.seed, "" if r.phi is None else repr(r.phi), repr(r.wall_time_s)])
    payload = {"config": cfg_dict, "rows": [asdict(r) for r in summary.rows],
               "aggregates": summary.aggregates()}
    (out_dir / "summary.json").write_text(json.dumps(payload, indent=2) + "\n")


def emit_sweep_data(summary: RunSummary, path) -> Path:
    """Final objective against the initial constant, one column per label."""
    rows = [r for r in summary.rows if r.phi is not None]
    labels = list(dict.fromkeys(r.label for r in rows))
    phis = sorted({r.phi for r in rows})
    lines = ["# phi " + " ".join(f"{lab}_median" for lab in labels)]
    for phi in phis:
        vals = [float(np.median([r.best_value for r in rows if r.phi == phi and r.label == lab]))
                for lab in labels]
        lines.append(" ".join([repr(phi)] + [repr(v) for v in vals]))
    Path(path).write_text("\n".join(lines) + "\n")
    return Path(path)


def run_experiment(config: ExperimentConfig) -> RunSummary:
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg_dict = config.to_dict()
    save_config(config, out_dir / "config.json")
    tasks = _plan(config)
    if config.jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.jobs) as pool:
            chunks = list(pool.map(_run_task, [cfg_dict] * len(tasks), tasks))
    else:
        chunks = [_run_task(cfg_dict, t) for t in tasks]

    pairs = [p for chunk in chunks for p in chunk]
    summary = RunSummary([row for row, _ in pairs])
    write_summary(summary, out_dir, cfg_dict)
    plots = out_dir / "plots"
    for label in summary.labels():
        traces = [tr for row, tr in pairs if row.label == label]
        phis = sorted({row.phi for row, _ in pairs if row.label == label and row.phi is not None})
        if phis:
            for phi in phis:
                sel = [tr for row, tr in pairs if row.label == label and row.phi == phi]
                emit_plot_data(sel, plots / f"{label}_phi{phi:g}_convergence.dat")
        else:
            emit_plot_data(traces, plots / f"{label}_convergence.dat")
    if config.experiment == "initial_condition_sweep":
        emit_sweep_data(summary, plots / "final_vs_phi.dat")
    return summary

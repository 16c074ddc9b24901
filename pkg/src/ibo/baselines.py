"""Comparison optimizers: uniform random search and particle swarm.

Both return :class:`~ibo.engine.OptimizationResult` with one trace record per
objective evaluation, so their traces line up with IBO's.
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from .engine import OptimizationResult, Phase, _Tracer
from .gp import Dataset
from .objective import ObjectiveHandle
from .optimizers import project_box


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 20
    inertia: float = 0.729
    c1: float = 1.49445
    c2: float = 1.49445
    velocity_clamp: float = 0.2
    iterations: int = 100
    seed: int = 0
    initial_point: tuple | None = None

    def __post_init__(self):
        if self.swarm_size < 2:
            raise ValueError("swarm_size must be >= 2")
        if min(self.inertia, self.c1, self.c2, self.velocity_clamp) < 0:
            raise ValueError("PSO coefficients must be non-negative")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.initial_point is not None:
            object.__setattr__(self, "initial_point", tuple(map(float, self.initial_point)))

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["initial_point"] is not None:
            d["initial_point"] = list(d["initial_point"])
        return d


def _result(tracer, points, values, handle, calls0, config, seed, t0, **extra):
    i = int(np.argmin(values))
    return OptimizationResult(
        best_point=np.array(points[i]),
        best_value=float(values[i]),
        dataset=Dataset(np.array(points), np.array(values)),
        trace=tracer.records,
        n_evaluations=handle.n_value_calls - calls0,
        n_fd_evaluations=0,
        config=config,
        seed=seed,
        wall_time=time.monotonic() - t0,
        extra=extra,
    )


def random_search(handle: ObjectiveHandle, budget: int, rng: np.random.Generator,
                  initial_point=None, seed: int | None = None) -> OptimizationResult:
    if budget < 1:
        raise ValueError("budget must be >= 1")
    t0 = time.monotonic()
    calls0 = handle.n_value_calls
    pts = rng.uniform(handle.lower, handle.upper, size=(budget, handle.dim))
    if initial_point is not None:
        pts[0] = project_box(initial_point, handle.lower, handle.upper)
    tracer = _Tracer()
    vals = []
    for p in pts:
        v = handle.value(p)
        vals.append(v)
        tracer.add(Phase.GLOBAL, p, v)
    config = {"algorithm": "random", "budget": budget,
              "initial_point": None if initial_point is None else list(map(float, initial_point))}
    return _result(tracer, pts, vals, handle, calls0, config, seed, t0)


def pso_update(x, v, pbest, gbest, config: PsoConfig, rng: np.random.Generator, lower, upper):
    """One velocity/position update for the whole swarm (rows are particles)."""
    width = np.asarray(upper) - np.asarray(lower)
    r1 = rng.uniform(size=x.shape)
    r2 = rng.uniform(size=x.shape)
    v = config.inertia * v + config.c1 * r1 * (pbest - x) + config.c2 * r2 * (gbest - x)
    vmax = config.velocity_clamp * width
    v = np.clip(v, -vmax, vmax)
    x = project_box(x + v, lower, upper)
    return x, v


def pso(handle: ObjectiveHandle, config: PsoConfig | None = None,
        rng: np.random.Generator | None = None, budget: int | None = None) -> OptimizationResult:
    """Global-best PSO with zero initial velocities.

    ``budget`` caps the number of objective evaluations, possibly stopping
    part-way through an iteration.
    """
    config = config or PsoConfig()
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    t0 = time.monotonic()
    calls0 = handle.n_value_calls
    limit = budget if budget is not None else config.swarm_size * (config.iterations + 1)
    lower, upper = handle.lower, handle.upper

    x = rng.uniform(lower, upper, size=(config.swarm_size, handle.dim))
    if config.initial_point is not None:
        x[0] = project_box(config.initial_point, lower, upper)
    v = np.zeros_like(x)
    tracer = _Tracer()
    all_pts, all_vals = [], []

    def evaluate(i):
        val = handle.value(x[i])
        all_pts.append(x[i].copy())
        all_vals.append(val)
        tracer.add(Phase.GLOBAL, x[i], val)
        return val

    n = min(config.swarm_size, limit)
    y = np.full(config.swarm_size, np.inf)
    for i in range(n):
        y[i] = evaluate(i)
    pbest, pbest_y = x.copy(), y.copy()
    g = int(np.argmin(pbest_y))
    gbest, gbest_y = pbest[g].copy(), float(pbest_y[g])
    history = [gbest_y]

    for _ in range(config.iterations):
        if len(all_vals) >= limit:
            break
        x, v = pso_update(x, v, pbest, gbest, config, rng, lower, upper)
        for i in range(config.swarm_size):
            if len(all_vals) >= limit:
                break
            val = evaluate(i)
            if val < pbest_y[i]:
                pbest[i], pbest_y[i] = x[i].copy(), val
                if val < gbest_y:
                    gbest, gbest_y = x[i].copy(), val
        history.append(gbest_y)

    cfg = {"algorithm": "pso", **config.to_dict(), "budget": budget}
    return _result(tracer, all_pts, all_vals, handle, calls0, cfg, config.seed, t0,
                   gbest_history=history)

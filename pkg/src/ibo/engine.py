"""Improved Bayesian optimization: GP-guided global phase + projected Adam polish.

The global phase repeatedly proposes candidates around the most recently
accepted point, refines each with a few projected Adam steps on the
acquisition surface, evaluates the ``l`` lowest-scoring ones on the true
objective, and refits the GP. The local phase then runs projected Adam on the
true objective from the best point found.

Both Adam loops work in box-normalized coordinates, so learning rates are
fractions of each dimension's width.

Randomness: a single ``numpy.random.Generator`` is consumed in a fixed
order: the initial design first, then one proposal draw per global
iteration. The local phase is deterministic.
"""
from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, replace
from enum import Enum

import numpy as np

from .acquisition import AcquisitionKind, AcquisitionSpec, acq_eval, acq_grad
from .gp import (
    DEFAULT_JITTER,
    Dataset,
    GpModel,
    KernelFamily,
    KernelSpec,
    fit,
    median_heuristic_lengthscale,
)
from .objective import ObjectiveHandle
from .optimizers import AdamState, NonFiniteGradientError, adam_step, project_box

logger = logging.getLogger(__name__)


class Phase(str, Enum):
    GLOBAL = "global"
    LOCAL = "local"


class LocalStart(str, Enum):
    OBJECTIVE = "objective"
    ACQUISITION = "acquisition"


class OptimizationError(RuntimeError):
    """Wraps a failure during a run; ``trace`` holds the records made so far."""

    def __init__(self, message: str, trace: list):
        super().__init__(message)
        self.trace = trace


@dataclass(frozen=True)
class IboConfig:
    m: int = 15
    k: int = 5
    n: int = 5
    l: int = 1
    j0: int = 5
    sample_width: float = 0.1
    kernel: KernelFamily = KernelFamily.MATERN52
    lengthscale: float | None = None  # None: median heuristic on the initial design
    signal_variance: float = 1.0
    jitter: float = DEFAULT_JITTER
    acquisition: AcquisitionKind = AcquisitionKind.LCB
    kappa: float = 2.0
    xi: float | None = None
    inner_lr: float = 0.05
    local_phase: bool = True
    local_lr: float = 0.01
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    local_max_steps: int = 500
    local_tol: float = 1e-6
    local_patience: int = 5
    local_start: LocalStart = LocalStart.OBJECTIVE
    initial_point: tuple | None = None
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kernel", KernelFamily(self.kernel))
        object.__setattr__(self, "acquisition", AcquisitionKind(self.acquisition))
        object.__setattr__(self, "local_start", LocalStart(self.local_start))
        if self.initial_point is not None:
            object.__setattr__(self, "initial_point", tuple(map(float, self.initial_point)))
        for name in ("m", "k", "n", "j0"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 1 <= self.l <= self.k + 1:
            raise ValueError("l must satisfy 1 <= l <= k + 1")
        if not 0 < self.sample_width <= 1:
            raise ValueError("sample_width must lie in (0, 1]")
        if self.inner_lr <= 0 or self.local_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.local_max_steps < 0 or self.local_patience < 1:
            raise ValueError("local_max_steps >= 0 and local_patience >= 1 required")

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("kernel", "acquisition", "local_start"):
            d[key] = d[key].value
        if d["initial_point"] is not None:
            d["initial_point"] = list(d["initial_point"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "IboConfig":
        return cls(**d)


@dataclass(frozen=True)
class IterationRecord:
    index: int
    phase: Phase
    point: np.ndarray
    objective: float
    acq_score: float  # nan in the local phase
    distance_prev: float
    best_so_far: float
    wall_time: float


@dataclass
class OptimizationResult:
    best_point: np.ndarray
    best_value: float
    dataset: Dataset
    trace: list[IterationRecord]
    n_evaluations: int
    n_fd_evaluations: int
    config: dict
    seed: int | None
    local_aborted: bool = False
    wall_time: float = 0.0
    extra: dict = field(default_factory=dict)

    def best_so_far(self) -> np.ndarray:
        return np.array([r.best_so_far for r in self.trace])


def _bounds(handle_or_bounds):
    if isinstance(handle_or_bounds, ObjectiveHandle):
        return handle_or_bounds.lower, handle_or_bounds.upper
    lo, hi = handle_or_bounds
    return np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)


class _Tracer:
    def __init__(self, best: float = np.inf, prev_point=None):
        self.records: list[IterationRecord] = []
        self.best = best
        self.prev = prev_point
        self.t0 = time.monotonic()

    def add(self, phase: Phase, point, value: float, acq_score: float = np.nan):
        point = np.array(point, dtype=float)
        dist = 0.0 if self.prev is None else float(np.linalg.norm(point - self.prev))
        self.best = min(self.best, value)
        self.records.append(IterationRecord(
            index=len(self.records), phase=phase, point=point, objective=float(value),
            acq_score=float(acq_score), distance_prev=dist, best_so_far=float(self.best),
            wall_time=time.monotonic() - self.t0,
        ))
        self.prev = point


def init_design(handle: ObjectiveHandle, j0: int, rng: np.random.Generator,
                initial_point=None) -> Dataset:
    if j0 < 1:
        raise ValueError("j0 must be >= 1")
    pts = rng.uniform(handle.lower, handle.upper, size=(j0, handle.dim))
    if initial_point is not None:
        pts[0] = project_box(initial_point, handle.lower, handle.upper)
    vals = [handle.value(p) for p in pts]
    return Dataset(pts, vals)


def propose_candidates(last_best, bounds, k: int, w: float, rng: np.random.Generator) -> np.ndarray:
    """``last_best`` followed by ``k`` uniform draws from a truncated window around it."""
    lower, upper = _bounds(bounds)
    p = np.asarray(last_best, dtype=float)
    span = w * (upper - lower)
    lo = np.maximum(lower, p - span)
    hi = np.minimum(upper, p + span)
    draws = rng.uniform(lo, hi, size=(k, p.shape[0]))
    return np.vstack([p[None, :], draws])


def _to_unit(x, lower, width):
    return np.where(width > 0, (x - lower) / np.where(width > 0, width, 1.0), 0.0)


def _unit_shift(x, dz, lower, upper, width):
    # move x by a unit-coordinate step; a zero step leaves x bit-identical
    return project_box(x + dz * width, lower, upper)


def refine_candidate(model: GpModel, acq_spec: AcquisitionSpec, candidate, n: int, bounds,
                     inner_lr: float, beta1: float = 0.9, beta2: float = 0.999,
                     epsilon: float = 1e-8) -> np.ndarray:
    """Projected Adam on the acquisition; returns the lowest-scoring visited point."""
    return _refine(model, acq_spec, candidate, n, bounds, inner_lr, beta1, beta2, epsilon)[0]


def _refine(model, acq_spec, candidate, n, bounds, inner_lr, beta1=0.9, beta2=0.999, epsilon=1e-8):
    lower, upper = _bounds(bounds)
    width = upper - lower
    x = np.asarray(candidate, dtype=float)
    z = _to_unit(x, lower, width)
    state = AdamState.fresh(x.shape[0], inner_lr, beta1, beta2, epsilon)
    best_x, best_s = x, acq_eval(acq_spec, model, x)
    for _ in range(n):
        g = acq_grad(acq_spec, model, x) * width
        if not np.all(np.isfinite(g)):
            break
        z_new, state = adam_step(state, z, g)
        z_new = project_box(z_new, 0.0, 1.0)
        x = _unit_shift(x, z_new - z, lower, upper, width)
        z = z_new
        s = acq_eval(acq_spec, model, x)
        if s < best_s:
            best_x, best_s = x, s
    return best_x, best_s


def select_best(refined, model: GpModel, acq_spec: AcquisitionSpec, l: int) -> np.ndarray:
    refined = np.asarray(refined, dtype=float)
    if l > len(refined):
        raise ValueError(f"cannot select {l} of {len(refined)} candidates")
    scores = np.array([acq_eval(acq_spec, model, x) for x in refined])
    order = np.argsort(scores, kind="stable")[:l]
    return refined[order]


def _kernel_spec(config: IboConfig, data: Dataset, handle: ObjectiveHandle) -> KernelSpec:
    ell = config.lengthscale
    if ell is None:
        pts = data.points
        if len(pts) >= 2 and np.any(np.ptp(pts, axis=0) > 0):
            ell = median_heuristic_lengthscale(pts)
        else:
            w = float(np.mean(handle.width))
            ell = w if w > 0 else 1.0
    return KernelSpec(config.kernel, ell, config.signal_variance)


def _acq_spec(config: IboConfig, incumbent: float) -> AcquisitionSpec:
    return AcquisitionSpec(config.acquisition, config.kappa, config.xi, float(incumbent))


def run_global_phase(handle: ObjectiveHandle, config: IboConfig, rng: np.random.Generator,
                     data: Dataset | None = None, tracer: _Tracer | None = None):
    """Main acquisition loop. Returns (dataset, records, final model)."""
    if data is None:
        data = init_design(handle, config.j0, rng, config.initial_point)
    tracer = tracer or _Tracer(float(np.min(data.values)), data.points[-1])
    spec = _kernel_spec(config, data, handle)
    model = fit(data, spec, config.jitter)
    anchor = data.points[-1]
    bounds = (handle.lower, handle.upper)
    for _ in range(config.m):
        acq = _acq_spec(config, np.min(data.values))
        cands = propose_candidates(anchor, bounds, config.k, config.sample_width, rng)
        refined = []
        scores = []
        for c in cands:
            x, s = _refine(model, acq, c, config.n, bounds, config.inner_lr,
                           config.beta1, config.beta2, config.epsilon)
            refined.append(x)
            scores.append(s)
        order = np.argsort(np.array(scores), kind="stable")[: config.l]
        for j in order:
            v = handle.value(refined[j])
            data = data.append(refined[j], v)
            tracer.add(Phase.GLOBAL, refined[j], v, scores[j])
        anchor = refined[order[0]]
        model = fit(data, spec, config.jitter)
    return data, tracer.records, model


def run_local_phase(handle: ObjectiveHandle, start, config: IboConfig,
                    start_value: float | None = None, tracer: _Tracer | None = None):
    """Projected Adam on the true objective.

    Returns (best point, best value, records, aborted). Stops after
    ``local_patience`` consecutive steps with a relative change below
    ``local_tol`` or after ``local_max_steps`` steps.
    """
    x = np.asarray(start, dtype=float)
    v = handle.value(x) if start_value is None else float(start_value)
    tracer = tracer or _Tracer(v, x)
    tracer.prev = x
    width = handle.width
    best_x, best_v = x, v
    aborted = False
    if not np.any(width > 0):
        return best_x, best_v, tracer.records, aborted

    z = _to_unit(x, handle.lower, width)
    state = AdamState.fresh(handle.dim, config.local_lr, config.beta1, config.beta2, config.epsilon)
    calm = 0
    for _ in range(config.local_max_steps):
        g = handle.gradient(x) * width
        try:
            z_new, state = adam_step(state, z, g)
        except NonFiniteGradientError as err:
            logger.warning("local phase aborted: %s", err)
            aborted = True
            break
        z_new = project_box(z_new, 0.0, 1.0)
        x = _unit_shift(x, z_new - z, handle.lower, handle.upper, width)
        z = z_new
        v_new = handle.value(x)
        tracer.add(Phase.LOCAL, x, v_new)
        if v_new < best_v:
            best_x, best_v = x, v_new
        calm = calm + 1 if abs(v_new - v) < config.local_tol * max(1.0, abs(v_new)) else 0
        v = v_new
        if calm >= config.local_patience:
            break
    return best_x, best_v, tracer.records, aborted


def _local_start(config: IboConfig, data: Dataset, model: GpModel) -> int:
    if config.local_start is LocalStart.OBJECTIVE:
        return data.best_index()
    acq = _acq_spec(config, np.min(data.values))
    scores = np.array([acq_eval(acq, model, p) for p in data.points])
    return int(np.argmin(scores))


def optimize(handle: ObjectiveHandle, config: IboConfig | None = None,
             rng: np.random.Generator | None = None) -> OptimizationResult:
    config = config or IboConfig()
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    calls0, fd0 = handle.n_value_calls, handle.n_fd_calls
    tracer = None
    t0 = time.monotonic()
    try:
        data = init_design(handle, config.j0, rng, config.initial_point)
        tracer = _Tracer(float(np.min(data.values)), data.points[-1])
        data, _, model = run_global_phase(handle, config, rng, data, tracer)
        best_x, best_v = data.points[data.best_index()], float(np.min(data.values))
        aborted = False
        if config.local_phase:
            i0 = _local_start(config, data, model)
            lx, lv, _, aborted = run_local_phase(handle, data.points[i0], config,
                                                 float(data.values[i0]), tracer)
            if lv < best_v:
                best_x, best_v = lx, lv
    except Exception as err:
        raise OptimizationError(f"optimization failed: {err}",
                                tracer.records if tracer else []) from err
    return OptimizationResult(
        best_point=np.array(best_x),
        best_value=float(best_v),
        dataset=data,
        trace=tracer.records,
        n_evaluations=handle.n_value_calls - calls0,
        n_fd_evaluations=handle.n_fd_calls - fd0,
        config=config.to_dict(),
        seed=config.seed,
        local_aborted=aborted,
        wall_time=time.monotonic() - t0,
        extra={"local_start_value": float(data.values[i0]) if config.local_phase else None},
    )


def standard_bo_mode(handle: ObjectiveHandle, config: IboConfig | None = None,
                     rng: np.random.Generator | None = None) -> OptimizationResult:
    """Baseline BO: one acquisition step per candidate and no local phase."""
    config = replace(config or IboConfig(), n=1, local_phase=False)
    return optimize(handle, config, rng)

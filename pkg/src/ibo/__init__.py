"""Improved Bayesian optimization for high-dimensional control problems."""
from .acquisition import AcquisitionKind, AcquisitionSpec, acq_eval, acq_grad
from .baselines import PsoConfig, pso, random_search
from .benchmarks import BenchmarkEntry, benchmark_registry, get_benchmark
from .engine import (
    IboConfig,
    IterationRecord,
    OptimizationResult,
    optimize,
    standard_bo_mode,
)
from .epidemic import EpidemicParams, make_objective_handle, objective_value, simulate
from .gp import Dataset, GpModel, KernelFamily, KernelSpec, fit, posterior, posterior_grad
from .objective import ObjectiveHandle

__version__ = "0.1.0"

"""Two-dimensional synthetic test functions with known global minima."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .objective import ObjectiveHandle


def eggholder(x, y):
    a = x / 2 + y + 47
    b = x - (y + 47)
    return -(y + 47) * np.sin(np.sqrt(np.abs(a))) - x * np.sin(np.sqrt(np.abs(b)))


def eggholder_grad(x, y):
    a = x / 2 + y + 47
    b = x - (y + 47)
    ra, rb = np.sqrt(abs(a)), np.sqrt(abs(b))
    # d sin(sqrt|t|)/dt, set to 0 on the kink t = 0
    da = np.cos(ra) * np.sign(a) / (2 * ra) if ra > 0 else 0.0
    db = np.cos(rb) * np.sign(b) / (2 * rb) if rb > 0 else 0.0
    fx = -(y + 47) * da * 0.5 - np.sin(rb) - x * db
    fy = -np.sin(ra) - (y + 47) * da + x * db
    return np.array([fx, fy])


def rosenbrock(x, y):
    return (1 - x) ** 2 + 100 * (y - x * x) ** 2


def rosenbrock_grad(x, y):
    return np.array([-2 * (1 - x) - 400 * x * (y - x * x), 200 * (y - x * x)])


def mccormick(x, y):
    return np.sin(x + y) + (x - y) ** 2 - 1.5 * x + 2.5 * y + 1


def mccormick_grad(x, y):
    c = np.cos(x + y)
    return np.array([c + 2 * (x - y) - 1.5, c - 2 * (x - y) + 2.5])


@dataclass(frozen=True)
class BenchmarkEntry:
    name: str
    func: Callable
    grad: Callable | None
    lower: tuple
    upper: tuple
    minimizer: tuple
    minimum: float
    dimension: int = 2

    @property
    def has_gradient(self) -> bool:
        return self.grad is not None

    def __call__(self, point) -> float:
        x, y = point
        return float(self.func(x, y))

    def gradient(self, point) -> np.ndarray:
        x, y = point
        return self.grad(x, y)

    def handle(self) -> ObjectiveHandle:
        return ObjectiveHandle(
            dim=self.dimension, lower=self.lower, upper=self.upper,
            value_fn=self, gradient_fn=self.gradient if self.grad else None, name=self.name,
        )


_REGISTRY = (
    BenchmarkEntry("eggholder", eggholder, eggholder_grad, (-512.0, -512.0), (512.0, 512.0),
                   (512.0, 404.2319), -959.6407),
    BenchmarkEntry("rosenbrock", rosenbrock, rosenbrock_grad, (-5.0, -5.0), (10.0, 10.0),
                   (1.0, 1.0), 0.0),
    BenchmarkEntry("mccormick", mccormick, mccormick_grad, (-1.5, -3.0), (4.0, 4.0),
                   (-0.54719, -1.54719), -1.9133),
)


def benchmark_registry() -> list[BenchmarkEntry]:
    return list(_REGISTRY)


def get_benchmark(name: str) -> BenchmarkEntry:
    for entry in _REGISTRY:
        if entry.name == name.lower():
            return entry
    raise KeyError(f"unknown benchmark {name!r}; choose from {[e.name for e in _REGISTRY]}")

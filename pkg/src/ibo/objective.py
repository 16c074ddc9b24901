from __future__ import annotations

from typing import Callable

import numpy as np


class ObjectiveError(ValueError):
    def __init__(self, point, value):
        super().__init__(f"objective returned {value!r} at point {np.asarray(point).tolist()}")
        self.point = np.asarray(point)
        self.value = value


def central_difference(fn: Callable, x, h: float, lower, upper) -> tuple[np.ndarray, int]:
    """Box-clamped central differences; one-sided where a bound is active.

    Returns the gradient and the number of ``fn`` calls made.
    """
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    calls = 0
    base = None
    for i in range(x.shape[0]):
        hi = min(x[i] + h, upper[i])
        lo = max(x[i] - h, lower[i])
        if hi <= lo:
            continue
        if hi > x[i]:
            xp = x.copy()
            xp[i] = hi
            fp = fn(xp)
            calls += 1
        else:
            if base is None:
                base = fn(x)
                calls += 1
            fp = base
        if lo < x[i]:
            xm = x.copy()
            xm[i] = lo
            fm = fn(xm)
            calls += 1
        else:
            if base is None:
                base = fn(x)
                calls += 1
            fm = base
        grad[i] = (fp - fm) / (hi - lo)
    return grad, calls


class ObjectiveHandle:
    """A box-constrained objective with evaluation accounting.

    ``gradient_fn`` returns either a gradient or ``(gradient, fd_calls)``.
    Without one, box-clamped central differences on ``value_fn`` are used.
    ``n_value_calls`` counts only :meth:`value`; finite-difference calls are
    tallied separately in ``n_fd_calls``.
    """

    def __init__(self, dim: int, lower, upper, value_fn: Callable,
                 gradient_fn: Callable | None = None, name: str = "objective",
                 fd_step: float = 1e-6):
        self.dim = int(dim)
        self.lower = np.broadcast_to(np.asarray(lower, dtype=float), (self.dim,)).copy()
        self.upper = np.broadcast_to(np.asarray(upper, dtype=float), (self.dim,)).copy()
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")
        self.value_fn = value_fn
        self.gradient_fn = gradient_fn
        self.name = name
        self.fd_step = fd_step
        self.n_value_calls = 0
        self.n_fd_calls = 0

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    def value(self, x) -> float:
        x = np.asarray(x, dtype=float)
        self.n_value_calls += 1
        v = float(self.value_fn(x))
        if not np.isfinite(v):
            raise ObjectiveError(x, v)
        return v

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.gradient_fn is None:
            h = self.fd_step * max(float(np.max(self.width, initial=0.0)), 1.0)
            g, calls = central_difference(lambda z: float(self.value_fn(z)), x, h,
                                          self.lower, self.upper)
            self.n_fd_calls += calls
            return g
        out = self.gradient_fn(x)
        if isinstance(out, tuple):
            g, calls = out
            self.n_fd_calls += int(calls)
        else:
            g = out
        return np.asarray(g, dtype=float)

    def reset_counters(self) -> None:
        self.n_value_calls = 0
        self.n_fd_calls = 0

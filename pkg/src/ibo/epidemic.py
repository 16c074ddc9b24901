"""SEIR epidemic model under a piecewise-constant control, and its cost.

The control ``u[k]`` acts on period ``[k, k+1)``. Each period is integrated
with ``substeps`` classical RK4 steps; the running cost is accumulated with a
left-endpoint rule on the same grid.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numba
import numpy as np

from .objective import ObjectiveHandle

STATE_TOL = 1e-6


class IntegrationError(RuntimeError):
    def __init__(self, period: int):
        super().__init__(f"SEIR state left [0, 1] during period {period}")
        self.period = period


@dataclass(frozen=True)
class SeirState:
    S: float
    E: float
    I: float
    R: float

    def as_array(self) -> np.ndarray:
        return np.array([self.S, self.E, self.I, self.R])

    @classmethod
    def from_array(cls, x) -> "SeirState":
        return cls(*map(float, x))


@dataclass(frozen=True)
class EpidemicParams:
    """Rates are per control period. Defaults are illustrative, not fitted."""

    tau: float = 0.01
    beta: float = 0.9
    alpha: float = 0.2
    gamma: float = 0.1
    C1: float = 100.0
    C2: float = 1.0
    t_f: int = 100
    substeps: int = 10
    initial: SeirState = field(default_factory=lambda: SeirState(0.99, 0.01, 0.0, 0.0))
    # True restores the recovery inflow as printed (I instead of gamma*I); breaks S+E+I+R = 1
    literal_recovery: bool = False

    def __post_init__(self):
        if isinstance(self.initial, dict):
            object.__setattr__(self, "initial", SeirState(**self.initial))
        elif not isinstance(self.initial, SeirState):
            object.__setattr__(self, "initial", SeirState.from_array(self.initial))
        for name in ("tau", "beta", "alpha", "gamma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.t_f < 1 or self.substeps < 1:
            raise ValueError("t_f and substeps must be >= 1")
        total = float(np.sum(self.initial.as_array()))
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"initial state sums to {total}, expected 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EpidemicParams":
        return cls(**d)

    def _args(self):
        s = self.initial
        return (self.tau, self.beta, self.alpha, self.gamma, self.C1, self.C2,
                int(self.substeps), s.S, s.E, s.I, s.R, bool(self.literal_recovery))


@dataclass(frozen=True)
class ControlVector:
    u: np.ndarray
    lower: float = 0.0
    upper: float = 1.0

    def __post_init__(self):
        u = np.array(self.u, dtype=float).reshape(-1)
        if np.any(u < self.lower) or np.any(u > self.upper):
            raise ValueError(f"control outside [{self.lower}, {self.upper}]")
        u.flags.writeable = False
        object.__setattr__(self, "u", u)


def control_profile(u):
    """The oscillatory control-cost term inside the absolute value."""
    return (0.3 * np.sin(10 * u) + np.sin(13 * u) + 0.9 * np.sin(42 * u)
            + 0.2 * np.sin(12 * u) + u * u)


def stage_cost(I, u, C1, C2):
    return C1 * I + C2 * np.abs(control_profile(u))


def seir_derivatives(state, u: float, p: EpidemicParams) -> np.ndarray:
    S, E, I, R = (state.as_array() if isinstance(state, SeirState) else np.asarray(state, float))
    inflow = I if p.literal_recovery else p.gamma * I
    return np.array([
        p.tau - p.beta * S * I - p.tau * S,
        p.beta * S * I - (p.tau + p.alpha) * E,
        p.alpha * E - (p.tau + p.gamma) * I - u * I,
        inflow - p.tau * R + u * I,
    ])


@numba.njit(cache=True)
def _rhs(S, E, I, R, u, tau, beta, alpha, gamma, literal):
    inf = beta * S * I
    rec = I if literal else gamma * I
    return (tau - inf - tau * S,
            inf - (tau + alpha) * E,
            alpha * E - (tau + gamma) * I - u * I,
            rec - tau * R + u * I)


@numba.njit(cache=True)
def _integrate(u, tau, beta, alpha, gamma, C1, C2, substeps, S, E, I, R, literal, states):
    """Integrates one control sequence; fills ``states`` (t_f+1, 4).

    Returns (cost, failed_period); failed_period is -1 on success.
    """
    dt = 1.0 / substeps
    lo = -1e-6
    hi = 1.0 + 1e-6
    states[0, 0] = S
    states[0, 1] = E
    states[0, 2] = I
    states[0, 3] = R
    cost = 0.0
    for k in range(u.shape[0]):
        uk = u[k]
        g = (0.3 * np.sin(10 * uk) + np.sin(13 * uk) + 0.9 * np.sin(42 * uk)
             + 0.2 * np.sin(12 * uk) + uk * uk)
        cost += C2 * abs(g)
        for _ in range(substeps):
            cost += C1 * I * dt
            a1, a2, a3, a4 = _rhs(S, E, I, R, uk, tau, beta, alpha, gamma, literal)
            b1, b2, b3, b4 = _rhs(S + 0.5 * dt * a1, E + 0.5 * dt * a2, I + 0.5 * dt * a3,
                                  R + 0.5 * dt * a4, uk, tau, beta, alpha, gamma, literal)
            c1, c2, c3, c4 = _rhs(S + 0.5 * dt * b1, E + 0.5 * dt * b2, I + 0.5 * dt * b3,
                                  R + 0.5 * dt * b4, uk, tau, beta, alpha, gamma, literal)
            d1, d2, d3, d4 = _rhs(S + dt * c1, E + dt * c2, I + dt * c3, R + dt * c4,
                                  uk, tau, beta, alpha, gamma, literal)
            S += dt * (a1 + 2 * b1 + 2 * c1 + d1) / 6.0
            E += dt * (a2 + 2 * b2 + 2 * c2 + d2) / 6.0
            I += dt * (a3 + 2 * b3 + 2 * c3 + d3) / 6.0
            R += dt * (a4 + 2 * b4 + 2 * c4 + d4) / 6.0
            if not (lo <= S <= hi and lo <= E <= hi and lo <= I <= hi and lo <= R <= hi):
                return cost, k
        states[k + 1, 0] = S
        states[k + 1, 1] = E
        states[k + 1, 2] = I
        states[k + 1, 3] = R
    return cost, -1


@numba.njit(cache=True)
def _batch_cost(U, tau, beta, alpha, gamma, C1, C2, substeps, S, E, I, R, literal):
    n = U.shape[0]
    out = np.empty(n)
    failed = np.full(n, -1)
    states = np.empty((U.shape[1] + 1, 4))
    for b in range(n):
        c, f = _integrate(U[b], tau, beta, alpha, gamma, C1, C2, substeps,
                          S, E, I, R, literal, states)
        out[b] = c
        failed[b] = f
    return out, failed


def _controls(p: EpidemicParams, control) -> np.ndarray:
    u = control.u if isinstance(control, ControlVector) else control
    u = np.ascontiguousarray(u, dtype=float)
    if u.shape[-1] != p.t_f:
        raise ValueError(f"control has {u.shape[-1]} periods, expected t_f={p.t_f}")
    return u


def simulate(p: EpidemicParams, control) -> np.ndarray:
    """States at period boundaries, shape (t_f + 1, 4) with columns S, E, I, R."""
    u = _controls(p, control).reshape(-1)
    states = np.zeros((p.t_f + 1, 4))
    _, failed = _integrate(u, *p._args(), states)
    if failed >= 0:
        raise IntegrationError(int(failed))
    return states


def objective_values(p: EpidemicParams, controls) -> np.ndarray:
    """Total cost for each row of a (batch, t_f) control array."""
    U = np.atleast_2d(_controls(p, controls))
    costs, failed = _batch_cost(U, *p._args())
    bad = np.flatnonzero(failed >= 0)
    if bad.size:
        raise IntegrationError(int(failed[bad[0]]))
    return costs


def objective_value(p: EpidemicParams, control) -> float:
    return float(objective_values(p, _controls(p, control).reshape(1, -1))[0])


def objective_grad_fd(p: EpidemicParams, control, h: float, lower=0.0, upper=1.0,
                      base_value: float | None = None) -> tuple[np.ndarray, int]:
    """Central differences, clamped to the box (one-sided at a bound).

    Returns the gradient and the number of objective evaluations spent.
    """
    if not h > 0:
        raise ValueError("h must be positive")
    u = _controls(p, control).reshape(-1)
    d = u.shape[0]
    lower = np.broadcast_to(np.asarray(lower, float), (d,))
    upper = np.broadcast_to(np.asarray(upper, float), (d,))
    up = np.minimum(u + h, upper)
    dn = np.maximum(u - h, lower)
    width = up - dn
    plus_moves = up != u
    minus_moves = dn != u

    rows = []
    for i in range(d):
        if plus_moves[i]:
            x = u.copy()
            x[i] = up[i]
            rows.append(x)
        if minus_moves[i]:
            x = u.copy()
            x[i] = dn[i]
            rows.append(x)
    one_sided = (plus_moves != minus_moves) & (width > 0)
    need_base = bool(np.any(one_sided)) and base_value is None
    if need_base:
        rows.append(u.copy())
    vals = objective_values(p, np.array(rows)) if rows else np.empty(0)
    evals = len(rows)
    base = vals[-1] if need_base else base_value

    grad = np.zeros(d)
    j = 0
    for i in range(d):
        fp = fm = base
        if plus_moves[i]:
            fp = vals[j]
            j += 1
        if minus_moves[i]:
            fm = vals[j]
            j += 1
        if width[i] > 0:
            grad[i] = (fp - fm) / width[i]
    return grad, evals


def make_objective_handle(p: EpidemicParams | None = None, bounds=(0.0, 1.0),
                          h: float | None = None) -> ObjectiveHandle:
    p = p or EpidemicParams()
    lo, hi = map(float, bounds)
    step = h if h is not None else 1e-4 * (hi - lo) if hi > lo else 1e-4

    def value(x):
        return objective_value(p, x)

    def gradient(x):
        return objective_grad_fd(p, x, step, lo, hi)

    return ObjectiveHandle(
        dim=p.t_f,
        lower=np.full(p.t_f, lo),
        upper=np.full(p.t_f, hi),
        value_fn=value,
        gradient_fn=gradient,
        name="seir",
    )

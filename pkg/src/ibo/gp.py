"""Gaussian-process regression with fixed hyperparameters.

Observations are standardized before fitting and the prior mean is zero in
standardized space. Posterior mean/variance are returned in raw objective
units, together with their analytic gradients with respect to the query.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

logger = logging.getLogger(__name__)

DEFAULT_JITTER = 1e-8
MAX_JITTER = 1e-2


class KernelFamily(str, Enum):
    MATERN32 = "Matern32"
    MATERN52 = "Matern52"
    RBF = "RBF"
    EXPONENTIAL = "Exponential"


class GPFitError(np.linalg.LinAlgError):
    """Raised when the Gram matrix cannot be factorized even at maximum jitter."""

    def __init__(self, message: str, jitter: float):
        super().__init__(message)
        self.jitter = jitter


@dataclass(frozen=True)
class KernelSpec:
    family: KernelFamily = KernelFamily.MATERN52
    lengthscale: float = 1.0
    signal_variance: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        if not (np.isfinite(self.lengthscale) and self.lengthscale > 0):
            raise ValueError(f"lengthscale must be positive, got {self.lengthscale}")
        if not (np.isfinite(self.signal_variance) and self.signal_variance > 0):
            raise ValueError(f"signal_variance must be positive, got {self.signal_variance}")


@dataclass(frozen=True)
class PosteriorResult:
    mean: float
    variance: float

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))


@dataclass(frozen=True)
class Dataset:
    """Ordered (point, value) observations."""

    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=float, ndmin=2)
        vals = np.array(self.values, dtype=float).reshape(-1)
        if pts.shape[0] != vals.shape[0]:
            raise ValueError(f"{pts.shape[0]} points but {vals.shape[0]} values")
        pts.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def append(self, point, value) -> "Dataset":
        point = np.asarray(point, dtype=float).reshape(1, -1)
        return Dataset(np.vstack([self.points, point]), np.append(self.values, float(value)))

    def best_index(self) -> int:
        # np.argmin returns the first occurrence: earliest index wins ties
        return int(np.argmin(self.values))


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite input")


def _distances(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Differences a - b_i (n, d) and their norms (n,) for a single point a."""
    diff = a[None, :] - b
    return diff, np.sqrt(np.sum(diff * diff, axis=1))


def _kernel_from_r(spec: KernelSpec, r: np.ndarray) -> np.ndarray:
    ell, s2 = spec.lengthscale, spec.signal_variance
    fam = spec.family
    if fam is KernelFamily.RBF:
        return s2 * np.exp(-0.5 * (r / ell) ** 2)
    if fam is KernelFamily.MATERN32:
        c = np.sqrt(3.0) * r / ell
        return s2 * (1.0 + c) * np.exp(-c)
    if fam is KernelFamily.MATERN52:
        c = np.sqrt(5.0) * r / ell
        return s2 * (1.0 + c + c * c / 3.0) * np.exp(-c)
    if fam is KernelFamily.EXPONENTIAL:
        return s2 * np.exp(-r / ell)
    raise ValueError(f"unknown kernel family {fam}")


def kernel_vector(spec: KernelSpec, a, points) -> np.ndarray:
    """k(a, p_i) for every row p_i of ``points``."""
    a = np.asarray(a, dtype=float)
    points = np.asarray(points, dtype=float)
    _, r = _distances(a, points)
    return _kernel_from_r(spec, r)


def kernel_eval(spec: KernelSpec, a, b) -> float:
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    _check_finite(a, b)
    return float(kernel_vector(spec, a, b[None, :])[0])


def kernel_jacobian(spec: KernelSpec, a, points) -> np.ndarray:
    """Rows are d k(a, p_i) / d a, shape (n, d).

    Where a coincides with p_i the row is zero by convention (Matern32 and
    Exponential are not differentiable there; the others have zero gradient).
    """
    a = np.asarray(a, dtype=float)
    points = np.asarray(points, dtype=float)
    diff, r = _distances(a, points)
    ell, s2 = spec.lengthscale, spec.signal_variance
    fam = spec.family
    # coefficient g with d k / d a = g * (a - b)
    if fam is KernelFamily.RBF:
        g = -_kernel_from_r(spec, r) / ell**2
    elif fam is KernelFamily.MATERN32:
        c = np.sqrt(3.0) / ell
        g = -s2 * c * c * np.exp(-c * r)
    elif fam is KernelFamily.MATERN52:
        c = np.sqrt(5.0) / ell
        g = -s2 * (c * c / 3.0) * (1.0 + c * r) * np.exp(-c * r)
    elif fam is KernelFamily.EXPONENTIAL:
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(r > 0, -s2 * np.exp(-r / ell) / (ell * r), 0.0)
    else:
        raise ValueError(f"unknown kernel family {fam}")
    g = np.where(r > 0, g, 0.0)
    return g[:, None] * diff


def kernel_grad(spec: KernelSpec, a, b) -> np.ndarray:
    a = np.asarray(a, dtype=float).reshape(-1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape[0]} vs {b.shape[0]}")
    _check_finite(a, b)
    return kernel_jacobian(spec, a, b[None, :])[0]


def gram_matrix(spec: KernelSpec, points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ValueError("need a non-empty (n, d) array of points")
    sq = np.sum(pts * pts, axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * pts @ pts.T, 0.0)
    K = _kernel_from_r(spec, np.sqrt(d2))
    # the expansion above loses exactness on the diagonal and symmetry
    K = 0.5 * (K + K.T)
    np.fill_diagonal(K, spec.signal_variance)
    return K


def median_heuristic_lengthscale(points) -> float:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    n = pts.shape[0]
    if n < 2:
        raise ValueError("median heuristic needs at least 2 points")
    iu = np.triu_indices(n, k=1)
    d = np.sqrt(np.sum((pts[iu[0]] - pts[iu[1]]) ** 2, axis=1))
    med = float(np.median(d))
    return med if med > 0 else 1.0


@dataclass(frozen=True)
class GpModel:
    kernel: KernelSpec
    points: np.ndarray
    values: np.ndarray
    value_mean: float
    value_std: float
    jitter: float
    chol: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dataset(self) -> Dataset:
        return Dataset(self.points, self.value_mean + self.value_std * self.values)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


def fit(dataset: Dataset, spec: KernelSpec, jitter: float = DEFAULT_JITTER) -> GpModel:
    if len(dataset) < 1:
        raise ValueError("cannot fit a GP to an empty dataset")
    if jitter < 0:
        raise ValueError("jitter must be non-negative")
    pts = dataset.points
    raw = dataset.values
    _check_finite(pts, raw)

    mean = float(np.mean(raw))
    std = float(np.std(raw))
    if not std > 0:
        std = 1.0
    y = (raw - mean) / std

    K = gram_matrix(spec, pts)
    n = K.shape[0]
    jit = jitter
    while True:
        try:
            L = np.linalg.cholesky(K + jit * np.eye(n))
            break
        except np.linalg.LinAlgError:
            nxt = max(jit * 10.0, DEFAULT_JITTER) if jit > 0 else DEFAULT_JITTER
            if jit >= MAX_JITTER or nxt > MAX_JITTER * (1 + 1e-12):
                raise GPFitError(f"Cholesky failed at jitter {jit:g}", jit) from None
            logger.info("Cholesky failed at jitter %g, retrying with %g", jit, nxt)
            jit = nxt
    alpha = cho_solve((L, True), y)
    return GpModel(
        kernel=spec,
        points=_frozen(pts),
        values=_frozen(y),
        value_mean=mean,
        value_std=std,
        jitter=jit,
        chol=_frozen(L),
        alpha=_frozen(alpha),
    )


def append_observation(model: GpModel, point, value) -> GpModel:
    point = np.asarray(point, dtype=float).reshape(-1)
    if point.shape[0] != model.dim:
        raise ValueError(f"dimension mismatch: {point.shape[0]} vs {model.dim}")
    # refit from the requested jitter floor, not the escalated one
    return fit(model.dataset.append(point, value), model.kernel, DEFAULT_JITTER)


def _query(model: GpModel, query) -> np.ndarray:
    q = np.asarray(query, dtype=float).reshape(-1)
    if q.shape[0] != model.dim:
        raise ValueError(f"dimension mismatch: {q.shape[0]} vs {model.dim}")
    return q


def _standardized(model: GpModel, q: np.ndarray) -> tuple[float, float, np.ndarray, np.ndarray]:
    kq = kernel_vector(model.kernel, q, model.points)
    mu = float(kq @ model.alpha)
    v = solve_triangular(model.chol, kq, lower=True)
    var = model.kernel.signal_variance - float(v @ v)
    return mu, var, kq, v


def posterior(model: GpModel, query) -> PosteriorResult:
    q = _query(model, query)
    mu, var, _, _ = _standardized(model, q)
    if var < -1e-9:
        logger.warning("negative posterior variance %g clamped to 0", var)
    return PosteriorResult(
        mean=model.value_mean + model.value_std * mu,
        variance=model.value_std**2 * max(var, 0.0),
    )


def posterior_grad(model: GpModel, query) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the returned posterior mean and variance w.r.t. the query."""
    q = _query(model, query)
    _, var, _, v = _standardized(model, q)
    J = kernel_jacobian(model.kernel, q, model.points)
    dmu = model.value_std * (J.T @ model.alpha)
    if var <= 0.0:
        return dmu, np.zeros_like(q)
    w = solve_triangular(model.chol.T, v, lower=False)
    dvar = model.value_std**2 * (-2.0 * (J.T @ w))
    return dmu, dvar

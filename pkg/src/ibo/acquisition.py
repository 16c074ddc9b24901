"""Acquisition scores over GP posteriors, all in "lower is better" form.

PI and EI are negated so that every acquisition is minimized.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from scipy.stats import norm

from .gp import GpModel, posterior, posterior_grad

SIGMA_FLOOR = 1e-12


class AcquisitionKind(str, Enum):
    LCB = "LCB"
    PI = "PI"
    EI = "EI"


def default_xi(incumbent: float) -> float:
    return max(0.01 * abs(incumbent), 1e-3)


@dataclass(frozen=True)
class AcquisitionSpec:
    kind: AcquisitionKind = AcquisitionKind.LCB
    kappa: float = 2.0
    xi: float | None = None
    incumbent: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", AcquisitionKind(self.kind))
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa}")
        if self.xi is not None and self.xi < 0:
            raise ValueError(f"xi must be non-negative, got {self.xi}")

    @property
    def margin(self) -> float:
        return default_xi(self.incumbent) if self.xi is None else self.xi

    def with_incumbent(self, incumbent: float) -> "AcquisitionSpec":
        return replace(self, incumbent=float(incumbent))


def score_from_moments(spec: AcquisitionSpec, mu: float, sigma: float) -> float:
    kind = spec.kind
    if kind is AcquisitionKind.LCB:
        return mu - spec.kappa * sigma
    gap = spec.incumbent - mu - spec.margin
    if sigma <= SIGMA_FLOOR:
        if kind is AcquisitionKind.PI:
            return -1.0 if gap > 0 else 0.0
        return -max(gap, 0.0)
    z = gap / sigma
    if kind is AcquisitionKind.PI:
        return -float(norm.cdf(z))
    return -(gap * float(norm.cdf(z)) + sigma * float(norm.pdf(z)))


def acq_eval(spec: AcquisitionSpec, model: GpModel, query) -> float:
    post = posterior(model, query)
    return score_from_moments(spec, post.mean, post.std)


def acq_grad(spec: AcquisitionSpec, model: GpModel, query) -> np.ndarray:
    post = posterior(model, query)
    dmu, dvar = posterior_grad(model, query)
    sigma = post.std
    kind = spec.kind
    if kind is AcquisitionKind.LCB:
        if sigma <= SIGMA_FLOOR:
            return dmu
        return dmu - spec.kappa * dvar / (2.0 * sigma)
    if sigma <= SIGMA_FLOOR:
        return np.zeros_like(dmu)
    dsigma = dvar / (2.0 * sigma)
    z = (spec.incumbent - post.mean - spec.margin) / sigma
    if kind is AcquisitionKind.PI:
        dz = -dmu / sigma - z * dsigma / sigma
        return -float(norm.pdf(z)) * dz
    return float(norm.cdf(z)) * dmu - float(norm.pdf(z)) * dsigma

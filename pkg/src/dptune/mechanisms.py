"""Declarative base mechanisms and their RDP curves."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .errors import DomainError
from .rdp_core import AlphaGrid, RdpCurve, compose, gaussian_curve


@dataclass(frozen=True)
class Gaussian:
    sigma: float
    sensitivity: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"sigma must be > 0, got {self.sigma}")
        if not self.sensitivity >= 0:
            raise DomainError(f"sensitivity must be >= 0, got {self.sensitivity}")


@dataclass(frozen=True)
class SubsampledGaussian:
    """Gaussian mechanism (unit sensitivity) run on a Poisson(γ) subsample."""

    sigma: float
    gamma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError(f"sigma must be > 0, got {self.sigma}")
        if not 0.0 <= self.gamma <= 1.0:
            raise DomainError(f"gamma must lie in [0, 1], got {self.gamma}")


@dataclass(frozen=True)
class Composed:
    inner: "MechanismSpec"
    steps: int

    def __post_init__(self):
        if self.steps < 1 or int(self.steps) != self.steps:
            raise DomainError(f"steps must be a positive integer, got {self.steps}")


MechanismSpec = Union[Gaussian, SubsampledGaussian, Composed]


def dp_sgd(sigma: float, gamma: float, steps: int) -> Composed:
    """``steps`` iterations of Poisson-subsampled DP-SGD."""
    return Composed(SubsampledGaussian(sigma, gamma), steps)


def mechanism_curve(spec: MechanismSpec, grid: AlphaGrid | None = None) -> RdpCurve:
    from .subsampling import subsample_curve

    grid = grid or AlphaGrid.default()
    if isinstance(spec, Gaussian):
        return gaussian_curve(spec.sigma, spec.sensitivity, grid)
    if isinstance(spec, SubsampledGaussian):
        base = gaussian_curve(spec.sigma, 1.0, grid)
        if spec.gamma == 1.0:
            # no subsampling: keep the exact Gaussian line, fractional orders included
            return base
        return subsample_curve(base, spec.gamma)
    if isinstance(spec, Composed):
        return compose(mechanism_curve(spec.inner, grid), spec.steps)
    raise TypeError(f"not a mechanism spec: {spec!r}")

"""Transferring hyperparameters tuned on a subset of size m to a set of size n.

Clipping constant, noise multiplier, sampling ratio and step count stay fixed,
so the privacy guarantee of the final run equals that of a candidate run.
For plain DP-SGD the learning rate is scaled by n/m, which keeps the total
injected noise identical; for Adam it is kept as is.
"""

from __future__ import annotations

import dataclasses
import enum
import json
from dataclasses import dataclass

from .errors import DomainError


class Optimizer(str, enum.Enum):
    SGD = "sgd"
    ADAM = "adam"


@dataclass(frozen=True)
class HyperParams:
    eta: float
    clip: float
    gamma: float
    steps: int
    optimizer: Optimizer = Optimizer.SGD

    def __post_init__(self):
        object.__setattr__(self, "optimizer", Optimizer(self.optimizer))
        if not self.eta > 0:
            raise DomainError(f"learning rate must be > 0, got {self.eta}")
        if not self.clip > 0:
            raise DomainError(f"clip must be > 0, got {self.clip}")
        if not 0 < self.gamma <= 1:
            raise DomainError(f"gamma must lie in (0, 1], got {self.gamma}")
        if self.steps < 1 or int(self.steps) != self.steps:
            raise DomainError(f"steps must be a positive integer, got {self.steps}")

    def batch_size(self, n: int) -> int:
        """Expected batch size γ·n, rounded for display."""
        return int(round(self.gamma * n))

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["optimizer"] = self.optimizer.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "HyperParams":
        return cls(d["eta"], d["clip"], d["gamma"], int(d["steps"]), Optimizer(d["optimizer"]))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "HyperParams":
        return cls.from_dict(json.loads(text))


def extrapolate(params: HyperParams, m: int, n: int) -> HyperParams:
    if m < 1 or n < 1:
        raise DomainError(f"dataset sizes must be >= 1, got m={m}, n={n}")
    if params.optimizer is Optimizer.ADAM:
        return params
    return dataclasses.replace(params, eta=params.eta * n / m)


def optimal_lr_estimate(gamma: float, n: int, sigma: float, clip: float) -> float:
    """Learning rate 2γ²n / (σ²C²) that best matches the posterior when DP noise dominates."""
    if not (gamma > 0 and n > 0 and sigma > 0 and clip > 0):
        raise DomainError("all inputs must be positive")
    return 2.0 * gamma**2 * n / (sigma**2 * clip**2)


def injected_noise_variance(eta, sigma, clip, gamma, n, steps) -> float:
    """Per-coordinate variance of the summed DP noise over ``steps`` updates."""
    if steps < 0:
        raise DomainError(f"steps must be >= 0, got {steps}")
    if not (gamma > 0 and n > 0):
        raise DomainError("gamma and n must be positive")
    return steps * (eta * sigma * clip) ** 2 / (gamma * n) ** 2

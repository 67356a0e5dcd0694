"""Privacy of hyperparameter tuning, with and without a random tuning subset.

Three pipelines are covered:

* ``BASELINE`` -- Poisson-count random search on the full data
  (Papernot & Steinke 2022, Poisson case).
* ``VARIANT1`` -- tune on a Poisson(q) subset X₁, train the final model on
  X ∖ X₁.  Bounded by a dedicated binomial expansion over the two mechanisms.
* ``VARIANT2`` -- tune on X₁, train the final model on all of X.  Bounded by
  subsampling amplification of the tuning curve plus composition.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._logmath import combine, log_binom, log_pow, log_sum, scaled_exp_log
from .errors import DomainError, GridMismatchError
from .mechanisms import MechanismSpec, mechanism_curve
from .rdp_core import AlphaGrid, RdpCurve, rdp_to_delta, rdp_to_dp
from .subsampling import _check_gamma, _check_integer_order, integer_values, subsample_curve


class Variant(str, enum.Enum):
    BASELINE = "baseline"
    VARIANT1 = "variant1"
    VARIANT2 = "variant2"


@dataclass(frozen=True)
class TuningConfig:
    """Expected candidate count ``mu``, tuning-subset ratio ``q`` and the base mechanism."""

    mu: float
    q: float
    variant: Variant = Variant.BASELINE
    base: MechanismSpec | None = None

    def __post_init__(self):
        if not self.mu > 0:
            raise DomainError(f"mu must be > 0, got {self.mu}")
        _check_gamma(self.q)
        object.__setattr__(self, "variant", Variant(self.variant))


def tuning_rdp(base: RdpCurve, mu: float) -> RdpCurve:
    """RDP of Poisson(μ)-count random search over candidates bounded by ``base``.

    At each order α the candidate's (ε̂, δ̂)-DP pair is taken at the largest
    admissible ε̂ = log(1 + 1/(α−1)), with δ̂ read off ``base`` by conversion.
    Orders where δ̂ ≥ 1 carry ``inf``.  The result dominates ``base`` when μ ≥ 1.
    """
    if not mu > 0:
        raise DomainError(f"mu must be > 0, got {mu}")
    out = np.empty(len(base.grid))
    log_mu = math.log(mu)
    for i, (alpha, eps) in enumerate(zip(base.orders, base.eps)):
        eps_hat = math.log1p(1.0 / (alpha - 1.0))
        delta_hat = rdp_to_delta(base, eps_hat)
        if not delta_hat < 1.0 or not math.isfinite(eps):
            out[i] = math.inf
        else:
            # μ < 1 makes the log term negative; a divergence never is
            out[i] = max(0.0, eps + mu * delta_hat + log_mu / (alpha - 1.0))
    return RdpCurve(base.grid, out)


def _variant1_directed(e1, e2, q, alpha):
    """Both directed log-sums of the tailored bound at integer order ``alpha``."""
    j = np.arange(1, alpha)
    # D(M(Y) || M(X)), Y = X plus one element
    fwd = [
        combine(log_pow(q, alpha), scaled_exp_log(alpha - 1, e1[alpha])),
        combine(log_pow(1.0 - q, alpha), scaled_exp_log(alpha - 1, e2[alpha])),
    ]
    fwd.extend(combine(
        log_binom(alpha, j) + log_pow(q, alpha - j) + log_pow(1.0 - q, j),
        scaled_exp_log(alpha - j - 1, e1[alpha - j]) + scaled_exp_log(j - 1, e2[j]),
    ))
    # D(M(X) || M(Y))
    rev = [combine(log_pow(1.0 - q, alpha - 1), scaled_exp_log(alpha - 1, e2[alpha]))]
    rev.extend(combine(
        log_binom(alpha - 1, j) + log_pow(q, j) + log_pow(1.0 - q, alpha - 1 - j),
        scaled_exp_log(j, e1[j + 1]) + scaled_exp_log(alpha - j - 1, e2[alpha - j]),
    ))
    return log_sum(np.hstack(fwd)), log_sum(np.hstack(rev))


def variant1_rdp(eps1: RdpCurve, eps2: RdpCurve, q: float, alpha: int) -> float:
    """RDP at integer ``alpha`` of tuning on a Poisson(q) subset, final training on the rest.

    ``eps1`` bounds the tuning algorithm, ``eps2`` the final-training
    mechanism.  The larger of the two directed bounds is reported.
    """
    _check_gamma(q)
    alpha = _check_integer_order(alpha)
    e1 = integer_values(eps1, alpha)
    e2 = integer_values(eps2, alpha)
    fwd, rev = _variant1_directed(e1, e2, q, alpha)
    return max(0.0, max(fwd, rev) / (alpha - 1))


def variant1_curve(eps1: RdpCurve, eps2: RdpCurve, q: float) -> RdpCurve:
    _check_gamma(q)
    if eps1.grid != eps2.grid:
        raise GridMismatchError("tuning and base curves must share a grid")
    grid = eps1.grid
    top = grid.max_integer_order
    e1 = integer_values(eps1, top)
    e2 = integer_values(eps2, top)
    out = np.full(len(grid), np.inf)
    for i in np.flatnonzero(grid.integer_mask):
        alpha = int(grid.orders[i])
        fwd, rev = _variant1_directed(e1, e2, q, alpha)
        out[i] = max(0.0, max(fwd, rev) / (alpha - 1))
    return RdpCurve(grid, out)


def variant2_curve(tuning_curve: RdpCurve, base: RdpCurve, q: float) -> RdpCurve:
    """Tuning curve amplified by Poisson(q) subsetting, composed with the final training."""
    return subsample_curve(tuning_curve, q) + base


def privacy_curve(variant, tuning_curve: RdpCurve, base: RdpCurve, q: float) -> RdpCurve:
    """Overall RDP curve of a pipeline given the tuning and final-training curves."""
    variant = Variant(variant)
    if variant is Variant.BASELINE:
        return tuning_curve
    if variant is Variant.VARIANT1:
        return variant1_curve(tuning_curve, base, q)
    return variant2_curve(tuning_curve, base, q)


def pipeline_epsilon(variant, base: RdpCurve, mu: float, q: float, delta: float) -> float:
    """Final ε at ``delta`` of a pipeline whose candidates and final run are bounded by ``base``."""
    return rdp_to_dp(privacy_curve(variant, tuning_rdp(base, mu), base, q), delta)


def config_curve(config: TuningConfig, grid: AlphaGrid | None = None) -> RdpCurve:
    """Overall RDP curve for ``config``; needs ``config.base``."""
    if config.base is None:
        raise DomainError("the tuning config has no base mechanism")
    base = mechanism_curve(config.base, grid)
    return privacy_curve(config.variant, tuning_rdp(base, config.mu), base, config.q)


@dataclass(frozen=True)
class CostModel:
    n: int
    epochs: float
    mu: float
    q: float

    def __post_init__(self):
        if not (self.n > 0 and self.epochs > 0 and self.mu > 0):
            raise DomainError("n, epochs and mu must be positive")
        _check_gamma(self.q)


@dataclass(frozen=True)
class CostEstimate:
    gradient_evals: float
    baseline_evals: float

    @property
    def ratio(self) -> float:
        """How many times more gradient evaluations the baseline needs."""
        return self.baseline_evals / self.gradient_evals


def expected_cost(model: CostModel, variant) -> CostEstimate:
    """Expected per-example gradient evaluations of a pipeline."""
    variant = Variant(variant)
    n, e, mu, q = model.n, model.epochs, model.mu, model.q
    baseline = mu * n * e
    if variant is Variant.BASELINE:
        evals = baseline
    elif variant is Variant.VARIANT1:
        evals = (mu * q * n + (1.0 - q) * n) * e
    else:
        evals = (mu * q * n + n) * e
    return CostEstimate(evals, baseline)

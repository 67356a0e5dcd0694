"""Rényi-DP curves, the Gaussian mechanism, composition and conversion to (ε, δ).

All ε values are in nats.  ``inf`` is used as an explicit "no bound at this
order" sentinel and propagates through max, composition and conversion.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, GridMismatchError

DEFAULT_MAX_ORDER = 64
DEFAULT_FRACTIONAL_ORDERS = (1.25, 1.5, 1.75)


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class AlphaGrid:
    """Strictly increasing Rényi orders, all > 1, with at least one integer ≥ 2."""

    orders: np.ndarray

    def __post_init__(self):
        orders = _frozen(np.atleast_1d(self.orders))
        if orders.ndim != 1 or orders.size == 0:
            raise DomainError("an AlphaGrid needs a non-empty 1-D list of orders")
        if not np.all(np.isfinite(orders)) or np.any(orders <= 1.0):
            raise DomainError("every Rényi order must be finite and > 1")
        if np.any(np.diff(orders) <= 0):
            raise DomainError("orders must be strictly increasing")
        if not np.any(_integer_mask(orders)):
            raise DomainError("the grid must contain at least one integer order >= 2")
        object.__setattr__(self, "orders", orders)

    @classmethod
    def default(cls, max_order: int = DEFAULT_MAX_ORDER) -> "AlphaGrid":
        """Integers 2..max_order plus the fractional orders 1.25, 1.5, 1.75."""
        return cls(list(DEFAULT_FRACTIONAL_ORDERS) + list(range(2, int(max_order) + 1)))

    @classmethod
    def integers(cls, max_order: int = DEFAULT_MAX_ORDER, min_order: int = 2) -> "AlphaGrid":
        return cls(list(range(int(min_order), int(max_order) + 1)))

    @property
    def integer_mask(self) -> np.ndarray:
        return _integer_mask(self.orders)

    @property
    def max_integer_order(self) -> int:
        return int(self.orders[self.integer_mask].max())

    def index(self, alpha: float) -> int:
        hits = np.flatnonzero(self.orders == alpha)
        if hits.size == 0:
            raise KeyError(alpha)
        return int(hits[0])

    def __len__(self):
        return self.orders.size

    def __iter__(self):
        return iter(self.orders.tolist())

    def __eq__(self, other):
        if not isinstance(other, AlphaGrid):
            return NotImplemented
        return np.array_equal(self.orders, other.orders)

    def __hash__(self):
        return hash(tuple(self.orders.tolist()))

    def __repr__(self):
        return f"AlphaGrid({self.orders.tolist()!r})"


def _integer_mask(orders: np.ndarray) -> np.ndarray:
    return (orders >= 2) & (orders == np.floor(orders))


@dataclass(frozen=True, eq=False)
class RdpCurve:
    """Map from Rényi order to an RDP bound ε(α) (nats)."""

    grid: AlphaGrid
    eps: np.ndarray

    def __post_init__(self):
        if not isinstance(self.grid, AlphaGrid):
            object.__setattr__(self, "grid", AlphaGrid(self.grid))
        eps = _frozen(np.atleast_1d(self.eps))
        if eps.shape != self.grid.orders.shape:
            raise DomainError(
                f"curve has {eps.size} values for {len(self.grid)} orders"
            )
        if np.any(np.isnan(eps)) or np.any(eps < 0) or np.any(eps == -np.inf):
            raise DomainError("RDP values must be >= 0 (inf allowed as 'no bound')")
        object.__setattr__(self, "eps", eps)

    @classmethod
    def zero(cls, grid: AlphaGrid | None = None) -> "RdpCurve":
        grid = grid or AlphaGrid.default()
        return cls(grid, np.zeros(len(grid)))

    @property
    def orders(self) -> np.ndarray:
        return self.grid.orders

    def at(self, alpha: float) -> float:
        """ε at one order of the grid (KeyError if the order is absent)."""
        return float(self.eps[self.grid.index(alpha)])

    def __add__(self, other: "RdpCurve") -> "RdpCurve":
        # sequential composition of two different mechanisms
        _check_same_grid([self, other])
        return RdpCurve(self.grid, self.eps + other.eps)

    def __eq__(self, other):
        if not isinstance(other, RdpCurve):
            return NotImplemented
        return self.grid == other.grid and np.array_equal(self.eps, other.eps)

    def __hash__(self):
        return hash((self.grid, tuple(self.eps.tolist())))

    def __repr__(self):
        pairs = ", ".join(f"{a:g}: {e:.6g}" for a, e in zip(self.orders, self.eps))
        return f"RdpCurve({{{pairs}}})"

    def to_dict(self) -> dict:
        # JSON has no infinity; null marks the "no bound" sentinel
        return {
            "orders": self.orders.tolist(),
            "eps": [float(e) if math.isfinite(e) else None for e in self.eps],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RdpCurve":
        eps = [math.inf if e is None else float(e) for e in data["eps"]]
        return cls(AlphaGrid(data["orders"]), eps)

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "RdpCurve":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["alpha", "eps"])
        for a, e in zip(self.orders, self.eps):
            writer.writerow([repr(float(a)), repr(float(e))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "RdpCurve":
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls(AlphaGrid([float(r["alpha"]) for r in rows]), [float(r["eps"]) for r in rows])


@dataclass(frozen=True)
class PrivacyTarget:
    """An (ε, δ) pair; ε in nats."""

    epsilon: float
    delta: float

    def __post_init__(self):
        if not (self.epsilon >= 0 and math.isfinite(self.epsilon)):
            raise DomainError(f"target epsilon must be finite and >= 0, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise DomainError(f"delta must lie in (0, 1), got {self.delta}")


def gaussian_rdp(sigma, sensitivity, alpha):
    """RDP of the Gaussian mechanism: α Δ² / (2σ²).  Vectorises over ``alpha``."""
    if not sigma > 0:
        raise DomainError(f"sigma must be > 0, got {sigma}")
    if not sensitivity >= 0:
        raise DomainError(f"sensitivity must be >= 0, got {sensitivity}")
    alpha_arr = np.asarray(alpha, dtype=float)
    if np.any(alpha_arr <= 1):
        raise DomainError("Rényi order must be > 1")
    out = alpha_arr * sensitivity**2 / (2.0 * sigma**2)
    return float(out) if out.ndim == 0 else out


def gaussian_curve(sigma: float, sensitivity: float = 1.0, grid: AlphaGrid | None = None) -> RdpCurve:
    grid = grid or AlphaGrid.default()
    return RdpCurve(grid, gaussian_rdp(sigma, sensitivity, grid.orders))


def compose(curve: RdpCurve, steps: int) -> RdpCurve:
    """``steps``-fold adaptive composition: pointwise T·ε(α)."""
    if steps < 1 or int(steps) != steps:
        raise DomainError(f"steps must be a positive integer, got {steps}")
    # inf stays inf; 0 stays 0
    return RdpCurve(curve.grid, curve.eps * int(steps))


def _log_delta_per_order(orders, eps_rdp, epsilon):
    a = orders
    return (a - 1.0) * (eps_rdp - epsilon) - np.log(a) + (a - 1.0) * np.log1p(-1.0 / a)


def rdp_to_dp(curve: RdpCurve, delta: float, return_order: bool = False):
    """Smallest ε such that the curve implies (ε, δ)-DP.

    Each order is converted with the Canonne–Kamath–Steinke bound solved for ε,
    then the minimum over orders is taken.  ε is floored at zero.  Returns
    ``inf`` (and order ``None``) when no order carries a finite bound.

    A zero divergence at any order means identical output distributions, so
    such a curve converts to ε = 0 exactly.
    """
    if not 0 < delta < 1:
        raise DomainError(f"delta must lie in (0, 1), got {delta}")
    a = curve.orders
    zero = np.flatnonzero(curve.eps == 0)
    if zero.size:
        return (0.0, float(a[zero[0]])) if return_order else 0.0
    with np.errstate(invalid="ignore"):
        per_order = (
            curve.eps
            + (math.log(1.0 / delta) - np.log(a)) / (a - 1.0)
            + np.log1p(-1.0 / a)
        )
    finite = np.isfinite(per_order)
    if not np.any(finite):
        return (math.inf, None) if return_order else math.inf
    idx = int(np.argmin(np.where(finite, per_order, np.inf)))
    eps = max(0.0, float(per_order[idx]))
    return (eps, float(a[idx])) if return_order else eps


def rdp_to_delta(curve: RdpCurve, epsilon: float, return_order: bool = False):
    """Smallest δ over orders such that the curve implies (ε, δ)-DP.

    The value is not capped at 1; callers decide what a vacuous δ means.
    A zero divergence at any order gives δ = 0.
    """
    if not epsilon >= 0:
        raise DomainError(f"epsilon must be >= 0, got {epsilon}")
    zero = np.flatnonzero(curve.eps == 0)
    if zero.size:
        return (0.0, float(curve.orders[zero[0]])) if return_order else 0.0
    log_d = _log_delta_per_order(curve.orders, curve.eps, epsilon)
    idx = int(np.argmin(log_d))
    with np.errstate(over="ignore"):
        delta = float(np.exp(log_d[idx]))
    return (delta, float(curve.orders[idx])) if return_order else delta


def _check_same_grid(curves: Sequence[RdpCurve]):
    if not curves:
        raise DomainError("need at least one curve")
    first = curves[0].grid
    for c in curves[1:]:
        if c.grid != first:
            raise GridMismatchError("curves are defined on different order grids")


def parallel_compose(curves: Iterable[RdpCurve]) -> RdpCurve:
    """Mechanisms applied to disjoint shards cost the pointwise maximum."""
    curves = list(curves)
    _check_same_grid(curves)
    return RdpCurve(curves[0].grid, np.max([c.eps for c in curves], axis=0))


def uniform_grid_bound(curves: Iterable[RdpCurve]) -> RdpCurve:
    """One bound valid for every candidate of a hyperparameter grid.

    Same arithmetic as :func:`parallel_compose`; a random pick among
    candidates is at most as private as the least private of them.
    """
    return parallel_compose(curves)

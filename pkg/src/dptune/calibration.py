"""Inverse accounting: noise multipliers and training lengths that meet a target.

Every search relies on the accounted ε being monotone: decreasing in σ and
non-decreasing in the number of steps T.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DomainError, NoSolutionError
from .mechanisms import SubsampledGaussian, mechanism_curve
from .rdp_core import AlphaGrid, PrivacyTarget, RdpCurve, compose, rdp_to_dp, uniform_grid_bound

SIGMA_BRACKET = (1e-2, 1e4)
RTOL = 1e-4
MAX_ITER = 200
MAX_STEPS = 10**12


def step_curve(gamma: float, sigma: float, grid: AlphaGrid | None = None) -> RdpCurve:
    """One DP-SGD step; γ = 1 is the plain Gaussian mechanism."""
    return mechanism_curve(SubsampledGaussian(sigma, gamma), grid)


def forward_curve(gamma: float, sigma: float, steps: int, grid: AlphaGrid | None = None) -> RdpCurve:
    return compose(step_curve(gamma, sigma, grid), steps)


def forward_epsilon(gamma, sigma, steps, delta, grid=None) -> float:
    """ε at ``delta`` after ``steps`` Poisson-subsampled Gaussian steps."""
    return rdp_to_dp(forward_curve(gamma, sigma, steps, grid), delta)


def _check_gamma(gamma):
    if not 0.0 < gamma <= 1.0:
        raise DomainError(f"gamma must lie in (0, 1], got {gamma}")


def _bisect_sigma(ok: Callable[[float], bool], bracket=SIGMA_BRACKET, rtol=RTOL) -> float:
    """Smallest σ in ``bracket`` with ``ok(σ)``, for a predicate monotone in σ."""
    lo, hi = bracket
    if not ok(hi):
        raise NoSolutionError(f"target not reachable with sigma <= {hi:g}")
    if ok(lo):
        return lo
    for _ in range(MAX_ITER):
        if hi - lo <= rtol * hi:
            break
        mid = math.sqrt(lo * hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _verify_sigma(ok, sigma, rtol, bracket):
    if not ok(sigma):
        raise RuntimeError(f"calibrated sigma={sigma!r} fails the forward check")
    below = sigma * (1.0 - 10 * rtol)
    if below >= bracket[0] and ok(below):
        raise RuntimeError(f"sigma={sigma!r} is not minimal: {below!r} also passes")


def calibrate_sigma(gamma: float, steps: int, target: PrivacyTarget,
                    grid: AlphaGrid | None = None, rtol: float = RTOL) -> float:
    """Smallest noise multiplier meeting ``target`` after ``steps`` DP-SGD steps."""
    _check_gamma(gamma)
    if steps < 1:
        raise DomainError(f"steps must be >= 1, got {steps}")

    def ok(sigma):
        return forward_epsilon(gamma, sigma, steps, target.delta, grid) <= target.epsilon

    sigma = _bisect_sigma(ok, rtol=rtol)
    _verify_sigma(ok, sigma, rtol, SIGMA_BRACKET)
    return sigma


def calibrate_steps(gamma: float, sigma: float, target: PrivacyTarget,
                    grid: AlphaGrid | None = None) -> int:
    """Largest T whose accounted ε meets ``target``; 0 if even one step is too many."""
    _check_gamma(gamma)
    if not sigma > 0:
        raise DomainError(f"sigma must be > 0, got {sigma}")
    one = step_curve(gamma, sigma, grid)
    seen: dict[int, float] = {}

    def eps_at(t):
        if t not in seen:
            seen[t] = rdp_to_dp(compose(one, t), target.delta)
        return seen[t]

    if eps_at(1) > target.epsilon:
        return 0
    good, bad = 1, 2
    while eps_at(bad) <= target.epsilon:
        good, bad = bad, 2 * bad
        if bad > MAX_STEPS:
            raise NoSolutionError(f"target still met after {good} steps")
    while bad - good > 1:
        mid = (good + bad) // 2
        if eps_at(mid) <= target.epsilon:
            good = mid
        else:
            bad = mid
    ts = sorted(seen)
    eps = [seen[t] for t in ts]
    if any(b < a for a, b in zip(eps, eps[1:])):
        raise RuntimeError("accounted epsilon is not monotone in the number of steps")
    return good


def alpha_line_holds(gamma, sigma, steps, slope, grid: AlphaGrid) -> bool:
    curve = forward_curve(gamma, sigma, steps, grid)
    return bool(np.all(curve.eps <= slope * curve.orders))


def calibrate_sigma_alpha_line(gamma: float, steps: int, slope: float,
                               grid: AlphaGrid | None = None, rtol: float = RTOL) -> float:
    """Smallest σ for which T·ε(α) ≤ slope·α at every order of ``grid``.

    The default grid is the integer orders 2..64.
    """
    _check_gamma(gamma)
    if steps < 1:
        raise DomainError(f"steps must be >= 1, got {steps}")
    if not slope > 0:
        raise DomainError(f"slope must be > 0, got {slope}")
    grid = grid or AlphaGrid.integers()

    def ok(sigma):
        return alpha_line_holds(gamma, sigma, steps, slope, grid)

    sigma = _bisect_sigma(ok, rtol=rtol)
    _verify_sigma(ok, sigma, rtol, SIGMA_BRACKET)
    return sigma


@dataclass(frozen=True)
class GridPoint:
    gamma: float
    steps: int

    @classmethod
    def from_epochs(cls, gamma: float, epochs: float) -> "GridPoint":
        # one epoch is 1/γ steps in expectation
        return cls(gamma, int(round(epochs / gamma)))


def grid_uniform_curve(points: Sequence[GridPoint], target: PrivacyTarget,
                       grid: AlphaGrid | None = None) -> tuple[list[float], RdpCurve]:
    """Calibrate σ per (γ, T) and return the sigmas and their pointwise-max curve."""
    points = [p if isinstance(p, GridPoint) else GridPoint(*p) for p in points]
    if not points:
        raise DomainError("the hyperparameter grid is empty")
    sigmas, curves = [], []
    for p in points:
        try:
            sigma = calibrate_sigma(p.gamma, p.steps, target, grid)
        except NoSolutionError as exc:
            raise NoSolutionError(f"gamma={p.gamma:g}, steps={p.steps}: {exc}") from exc
        sigmas.append(sigma)
        curves.append(forward_curve(p.gamma, sigma, p.steps, grid))
    return sigmas, uniform_grid_bound(curves)


def load_grid(source) -> list[GridPoint]:
    """Read a JSON list of ``{"gamma", "epochs", "n"}`` entries.

    ``source`` is a path or an already-parsed list.  ``gamma`` may be omitted
    when ``batch_size`` is given, in which case γ = batch_size / n.
    """
    if isinstance(source, (str, bytes)) or hasattr(source, "__fspath__"):
        with open(source) as fh:
            source = json.load(fh)
    if not isinstance(source, list) or not source:
        raise DomainError("grid file must hold a non-empty JSON list")
    points = []
    for i, entry in enumerate(source):
        try:
            gamma = entry["gamma"] if "gamma" in entry else entry["batch_size"] / entry["n"]
            points.append(GridPoint.from_epochs(float(gamma), float(entry["epochs"])))
        except (KeyError, TypeError, ZeroDivisionError) as exc:
            raise DomainError(f"grid entry {i} is malformed: {entry!r}") from exc
    return points


def calibration_report_csv(points: Iterable[GridPoint], sigmas: Iterable[float],
                           delta: float, grid: AlphaGrid | None = None) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["gamma", "steps", "sigma", "eps_check"])
    for p, sigma in zip(points, sigmas):
        eps = forward_epsilon(p.gamma, sigma, p.steps, delta, grid)
        writer.writerow([repr(p.gamma), p.steps, repr(sigma), repr(eps)])
    return buf.getvalue()

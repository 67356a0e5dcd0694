"""Privacy amplification by Poisson subsampling, and a quadrature oracle for it.

The amplification bound (Zhu & Wang 2019) holds for integer orders only.
Non-integer orders of a curve are returned as the ``inf`` sentinel.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from ._logmath import combine, log1p_exp, log_binom, log_pow, log_scaled_expm1, log_sum
from .errors import DomainError, MissingOrderError, NonConvergenceError
from .rdp_core import RdpCurve


def _check_gamma(gamma):
    if not 0.0 <= gamma <= 1.0:
        raise DomainError(f"subsampling ratio must lie in [0, 1], got {gamma}")


def _check_integer_order(alpha) -> int:
    if alpha != int(alpha) or alpha < 2:
        raise DomainError(f"order must be an integer >= 2, got {alpha}")
    return int(alpha)


def integer_values(curve: RdpCurve, max_order: int) -> np.ndarray:
    """ε(j) for j = 0..max_order, read from the curve's integer orders.

    Entries 0 and 1 are placeholders (``nan``); the bounds never read them
    with a non-zero weight.
    """
    out = np.full(max_order + 1, np.nan)
    for j in range(2, max_order + 1):
        try:
            out[j] = curve.at(j)
        except KeyError:
            raise MissingOrderError(f"curve lacks integer order {j}") from None
    return out


def _subsample_log_excess(eps_int: np.ndarray, gamma: float, alpha: int) -> float:
    """log(S − 1) where S is the amplification sum at integer order ``alpha``.

    With B_j = C(α,j)γʲ(1−γ)^(α−j) the first term of S is B_0 + B_1 and the
    B_j sum to one, so S − 1 = Σ_{j≥2} B_j·(w_j·e^((j−1)ε(j)) − 1) with w_2 = 1
    and w_j = 3 beyond.  Every summand is non-negative, so small amplified
    values keep full relative precision.
    """
    j = np.arange(2, alpha + 1)
    log_b = log_binom(alpha, j) + log_pow(gamma, j) + log_pow(1.0 - gamma, alpha - j)
    weight = np.where(j == 2, 1.0, 3.0)
    x = (j - 1) * eps_int[j]
    # a vanishing coefficient silences an infinite ε(j)
    return log_sum(combine(log_b, log_scaled_expm1(x, weight)))


def subsample_rdp(base: RdpCurve, gamma: float, alpha: int) -> float:
    """RDP at integer order ``alpha`` of ``base`` run on a Poisson(γ) subsample."""
    _check_gamma(gamma)
    alpha = _check_integer_order(alpha)
    eps_int = integer_values(base, alpha)
    return log1p_exp(_subsample_log_excess(eps_int, gamma, alpha)) / (alpha - 1)


def subsample_curve(base: RdpCurve, gamma: float) -> RdpCurve:
    """:func:`subsample_rdp` at every integer order of the grid; ``inf`` elsewhere."""
    _check_gamma(gamma)
    grid = base.grid
    mask = grid.integer_mask
    eps_int = integer_values(base, grid.max_integer_order)
    out = np.full(len(grid), np.inf)
    for i in np.flatnonzero(mask):
        alpha = int(grid.orders[i])
        out[i] = log1p_exp(_subsample_log_excess(eps_int, gamma, alpha)) / (alpha - 1)
    return RdpCurve(grid, out)


# --------------------------------------------------------------------------
# Quadrature oracle

TAIL_SIGMAS = 40.0
DEFAULT_NODES = 40001
RTOL = 1e-9


def _log_likelihood_ratio(x, sigma, gamma):
    """log p(x)/q(x) for p = γN(1,σ²) + (1-γ)N(0,σ²), q = N(0,σ²)."""
    u = (2.0 * x - 1.0) / (2.0 * sigma**2)
    if gamma == 0.0:
        return np.zeros_like(x)
    if gamma == 1.0:
        return u
    small = u < 30.0
    with np.errstate(over="ignore"):
        near = np.log1p(gamma * np.expm1(np.minimum(u, 30.0)))
    far = np.logaddexp(math.log1p(-gamma), math.log(gamma) + u)
    return np.where(small, near, far)


def _w_expm1(log_w, a):
    """w·(e^a − 1) without overflow where w is tiny and a is large."""
    with np.errstate(over="ignore", under="ignore"):
        direct = np.exp(log_w) * np.expm1(np.minimum(a, 1.0))
        wide = np.exp(log_w + a) - np.exp(log_w)
    return np.where(np.abs(a) < 1.0, direct, wide)


def _excess_integrand(x, sigma, gamma, alpha, reverse):
    # ∫ w·(r^α − 1) − α·∫ w·(r − 1), the second integral being exactly zero;
    # subtracting it removes the first-order cancellation when γ is small
    log_q = -0.5 * (x / sigma) ** 2 - math.log(sigma * math.sqrt(2.0 * math.pi))
    ratio = _log_likelihood_ratio(x, sigma, gamma)
    if reverse:
        log_w, b = log_q + ratio, -ratio
    else:
        log_w, b = log_q, ratio
    return _w_expm1(log_w, alpha * b) - alpha * _w_expm1(log_w, b)


def _domain(sigma, alpha):
    return -(alpha - 1.0) - TAIL_SIGMAS * sigma, alpha + TAIL_SIGMAS * sigma


def _trapezoid_excess(sigma, gamma, alpha, reverse, nodes):
    lo, hi = _domain(sigma, alpha)
    x = np.linspace(lo, hi, nodes)
    return integrate.trapezoid(_excess_integrand(x, sigma, gamma, alpha, reverse), x)


def _adaptive_excess(sigma, gamma, alpha, reverse):
    lo, hi = _domain(sigma, alpha)
    breaks = sorted({0.0, 1.0, float(alpha), -(alpha - 1.0)})
    f = lambda t: float(_excess_integrand(np.array([t]), sigma, gamma, alpha, reverse)[0])
    val, _ = integrate.quad(f, lo, hi, points=breaks, limit=2000, epsabs=1e-300, epsrel=1e-13)
    return val


def _close(a, b, rtol):
    return abs(a - b) <= rtol * max(abs(a), abs(b)) + 1e-300


def subsampled_gaussian_divergence(sigma, gamma, alpha, reverse=False, rule="trapezoid",
                                   nodes=DEFAULT_NODES):
    """D_α between the Poisson-subsampled Gaussian pair, by 1-D quadrature.

    ``reverse=False`` gives D_α(P‖Q) with P the mixture γN(1,σ²)+(1−γ)N(0,σ²)
    and Q = N(0,σ²); ``reverse=True`` gives D_α(Q‖P).

    ``rule`` is ``"trapezoid"`` (uniform grid, checked against a grid with
    twice the nodes) or ``"adaptive"`` (Gauss–Kronrod via QUADPACK).
    """
    if not sigma > 0:
        raise DomainError(f"sigma must be > 0, got {sigma}")
    _check_gamma(gamma)
    if not alpha > 1:
        raise DomainError(f"order must be > 1, got {alpha}")
    if gamma == 0.0:
        return 0.0
    if rule == "trapezoid":
        coarse = _trapezoid_excess(sigma, gamma, alpha, reverse, nodes)
        fine = _trapezoid_excess(sigma, gamma, alpha, reverse, 2 * nodes - 1)
        d_coarse = math.log1p(max(coarse, 0.0)) / (alpha - 1)
        d_fine = math.log1p(max(fine, 0.0)) / (alpha - 1)
        if not _close(d_coarse, d_fine, RTOL):
            raise NonConvergenceError(
                f"trapezoid refinements disagree: {d_coarse!r} vs {d_fine!r}"
            )
        excess = fine
    elif rule == "adaptive":
        excess = _adaptive_excess(sigma, gamma, alpha, reverse)
    else:
        raise ValueError(f"unknown quadrature rule {rule!r}")
    return math.log1p(max(excess, 0.0)) / (alpha - 1)


def renyi_quadrature_oracle(sigma: float, gamma: float, alpha: float, rule: str = "trapezoid") -> float:
    """Exact one-step RDP of the subsampled Gaussian under add/remove adjacency.

    Maximum of both directions, each computed by numerical quadrature.
    """
    return max(
        subsampled_gaussian_divergence(sigma, gamma, alpha, reverse=False, rule=rule),
        subsampled_gaussian_divergence(sigma, gamma, alpha, reverse=True, rule=rule),
    )


def renyi_divergence_quadrature(log_p, log_q, alpha, lo, hi, nodes=DEFAULT_NODES):
    """D_α(P‖Q) for 1-D densities given as vectorised log-density callables.

    The integral ∫ p^α q^(1−α) is accumulated in log space on a uniform grid
    over [lo, hi]; a grid with twice the nodes must agree to 1e-9 relative.
    """
    if not alpha > 1:
        raise DomainError(f"order must be > 1, got {alpha}")

    def log_integral(n):
        x, h = np.linspace(lo, hi, n, retstep=True)
        log_f = alpha * log_p(x) - (alpha - 1.0) * log_q(x)
        w = np.full(n, math.log(h))
        w[[0, -1]] += math.log(0.5)
        return float(logsumexp(log_f + w))

    coarse = log_integral(nodes) / (alpha - 1)
    fine = log_integral(2 * nodes - 1) / (alpha - 1)
    if not abs(coarse - fine) <= RTOL * max(abs(fine), 1e-12):
        raise NonConvergenceError(f"refinements disagree: {coarse!r} vs {fine!r}")
    return max(0.0, fine)

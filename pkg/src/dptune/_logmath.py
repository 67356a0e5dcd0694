"""Log-space helpers shared by the binomial-expansion bounds."""

import numpy as np
from scipy.special import gammaln, logsumexp, xlogy


def log_binom(n, k):
    """log C(n, k) via log-gamma; exact enough for n up to a few thousand."""
    n = np.asarray(n, dtype=float)
    k = np.asarray(k, dtype=float)
    return gammaln(n + 1.0) - gammaln(k + 1.0) - gammaln(n - k + 1.0)


def log_pow(base, exponent):
    """exponent * log(base) with the convention 0 * log(0) = 0."""
    return xlogy(exponent, base)


def scaled_exp_log(exponent, eps):
    """exponent * eps, treating 0 * inf as 0.

    Terms like exp(0 * eps(1)) appear in the binomial expansions; the order-1
    value is never needed, so it may be passed as anything (including inf).
    """
    exponent = np.asarray(exponent, dtype=float)
    eps = np.broadcast_to(np.asarray(eps, dtype=float), exponent.shape)
    out = np.zeros(np.broadcast(exponent, eps).shape)
    nz = exponent != 0
    out[nz] = exponent[nz] * eps[nz]
    return out


def log_sum(log_terms):
    """log of a sum of non-negative terms given as logs; -inf terms drop out.

    Terms that are inf * 0 style artefacts must already be mapped to -inf by
    the caller; any +inf term makes the sum +inf.
    """
    log_terms = np.asarray(log_terms, dtype=float)
    if log_terms.size == 0:
        return -np.inf
    if np.any(np.isnan(log_terms)):
        raise FloatingPointError("nan in log-sum terms")
    if np.any(log_terms == np.inf):
        return np.inf
    if np.all(log_terms == -np.inf):
        return -np.inf
    return float(logsumexp(log_terms))


def combine(log_coef, log_value):
    """log(coef * value) where a zero coefficient silences an infinite value."""
    log_coef = np.asarray(log_coef, dtype=float)
    log_value = np.asarray(log_value, dtype=float)
    out = log_coef + np.where(log_coef == -np.inf, 0.0, log_value)
    return out


def log_scaled_expm1(x, weight=1.0):
    """log(weight·eˣ − 1) for x ≥ 0 and weight ≥ 1, accurate for small and huge x."""
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        small = np.log((weight - 1.0) + weight * np.expm1(np.minimum(x, 1.0)))
        large = x + np.log(weight - np.exp(-np.maximum(x, 1.0)))
    return np.where(x < 1.0, small, large)


def log1p_exp(log_x):
    """log(1 + x) given log x; precise when x is tiny."""
    return float(np.logaddexp(0.0, log_x))

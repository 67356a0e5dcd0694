"""Acceptance suite: ten end-to-end checks at their stated tolerances.

Each check prints one ``PASS``/``FAIL`` line, collected again in the pytest
terminal summary.  Run alone with ``python3 -m pytest tests/test_acceptance.py``
or as a script with ``python3 tests/test_acceptance.py``.
"""

import csv
import io
import json
import math
import tempfile
import time
from pathlib import Path

import mpmath
import numpy as np
import pytest
from scipy.special import logsumexp
from scipy.stats import norm

from dptune import cli
from dptune.calibration import (
    SIGMA_BRACKET,
    calibrate_sigma,
    calibrate_steps,
    forward_curve,
    forward_epsilon,
)
from dptune.errors import NoSolutionError
from dptune.extrapolation import HyperParams, extrapolate, injected_noise_variance
from dptune.rdp_core import AlphaGrid, RdpCurve, PrivacyTarget, gaussian_curve, gaussian_rdp
from dptune.subsampling import (
    renyi_divergence_quadrature,
    subsample_rdp,
    subsampled_gaussian_divergence,
)
from dptune.tuning import CostModel, expected_cost, pipeline_epsilon, variant1_rdp

RESULTS: list[str] = []
ORACLE_RESOLUTION = 1e-12

SIM_CONFIG = {
    "task": {"n": 5000, "dim": 2, "class_separation": 3.0, "seed": 7},
    "tuning": {"mu": 15, "q": 0.1},
    "grid": {
        "learning_rates": [10 ** e for e in np.arange(-3, 1.01, 0.5).round(2).tolist()],
        "gamma": 0.01,
        "epochs": 20,
        "sigma": 2.0,
        "clip": 1.0,
    },
    "delta": 1e-5,
    "seed": 2024,
}


def report(number, title, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'} criterion {number:>2}: {title} -- {detail}"
    RESULTS.append(line)
    print(line)
    assert passed, line


# -- 1 ---------------------------------------------------------------------

def test_c01_gaussian_exactness():
    rng = np.random.default_rng(1)
    mpmath.mp.dps = 40
    worst = 0.0
    for _ in range(100):
        sigma, sens, alpha = 10 ** rng.uniform(-2, 3), rng.uniform(0, 10), 1 + 10 ** rng.uniform(-3, 3)
        exact = mpmath.mpf(alpha) * mpmath.mpf(sens) ** 2 / (2 * mpmath.mpf(sigma) ** 2)
        got = gaussian_rdp(sigma, sens, alpha)
        if exact != 0:
            worst = max(worst, float(abs((mpmath.mpf(got) - exact) / exact)))
    # a handful of float roundings: a few ulps
    report(1, "Gaussian RDP exactness", worst <= 4 * np.finfo(float).eps,
           f"max relative error {worst:.2e} over 100 inputs")


# -- 2 ---------------------------------------------------------------------

def test_c02_subsampled_bound_soundness():
    start = time.perf_counter()
    violations, disagreements, worst_gap, checked = [], 0, 0.0, 0
    for sigma in (1.0, 2.0, 4.0):
        base = gaussian_curve(sigma, grid=AlphaGrid.integers(16))
        for gamma in (0.001, 0.01, 0.1):
            for alpha in range(2, 17):
                oracle = []
                for reverse in (False, True):
                    trap = subsampled_gaussian_divergence(sigma, gamma, alpha, reverse, "trapezoid")
                    adapt = subsampled_gaussian_divergence(sigma, gamma, alpha, reverse, "adaptive")
                    gap = abs(trap - adapt) / max(abs(trap), abs(adapt))
                    worst_gap = max(worst_gap, gap)
                    disagreements += gap > 1e-9
                    oracle.append(trap)
                bound = subsample_rdp(base, gamma, alpha)
                checked += 1
                # at α = 2 the bound is exact, so allow float resolution only
                if bound < max(oracle) * (1 - ORACLE_RESOLUTION):
                    violations.append((sigma, gamma, alpha))
    elapsed = time.perf_counter() - start
    report(2, "subsampled bound >= quadrature oracle", not violations and not disagreements,
           f"{checked} cases, {len(violations)} violations, max rule gap {worst_gap:.1e}, {elapsed:.0f}s")


# -- 3 ---------------------------------------------------------------------

def _random_curve(rng, grid):
    if rng.random() < 0.5:
        return gaussian_curve(rng.uniform(1.5, 6.0), grid=grid)
    return RdpCurve(grid, np.cumsum(rng.uniform(0, 0.15, len(grid))))


def test_c03_variant1_limits():
    rng = np.random.default_rng(3)
    grid = AlphaGrid.integers(32)
    worst = 0.0
    for _ in range(20):
        e1, e2 = _random_curve(rng, grid), _random_curve(rng, grid)
        for alpha in range(2, 33):
            for q in (0.0, 1e-9):
                worst = max(worst, abs(variant1_rdp(e1, e2, q, alpha) - e2.at(alpha)))
            for q in (1 - 1e-9, 1.0):
                worst = max(worst, abs(variant1_rdp(e1, e2, q, alpha) - e1.at(alpha)))
    report(3, "variant-1 bound limits as q -> 0 and q -> 1", worst < 1e-6,
           f"max deviation {worst:.2e} over 20 pairs x 31 orders x 4 q")


# -- 4 ---------------------------------------------------------------------

def test_c04_pipeline_orderings():
    base = forward_curve(0.01, 2.0, 5000)
    delta = 1e-5
    eps = lambda v, mu, q: pipeline_epsilon(v, base, mu, q, delta)

    failures = []
    base15 = eps("baseline", 15, 0.1)
    for q in np.round(np.arange(1, 11) * 0.05, 2):
        e1, e2 = eps("variant1", 15, q), eps("variant2", 15, q)
        if not e1 <= e2 < base15:
            failures.append(f"q={float(q)}: v1={e1:.4f} v2={e2:.4f} base={base15:.4f}")
    part_a = not failures

    crossing = [float(q) for q in np.round(np.arange(1, 11) * 0.01, 2)
                if eps("variant2", 45, q) < eps("variant1", 45, q)]
    part_b = bool(crossing)

    baselines = {eps("baseline", mu, q) for mu in (15,) for q in (0.0, 0.1, 0.5, 1.0)}
    part_c = len(baselines) == 1

    detail = (f"(a) {'ok' if part_a else 'violated at ' + '; '.join(failures)}; "
              f"(b) mu=45 crossing at q in {crossing}; (c) baseline constant: {part_c}")
    report(4, "final-epsilon orderings of the pipelines", part_a and part_b and part_c, detail)


# -- 5 ---------------------------------------------------------------------

def test_c05_cost_ratios():
    r15 = expected_cost(CostModel(10_000, 40, 15, 0.1), "variant2").ratio
    r45 = expected_cost(CostModel(10_000, 40, 45, 0.1), "variant2").ratio
    r15_v1 = expected_cost(CostModel(10_000, 40, 15, 0.1), "variant1").ratio
    ok = r15 == 6.0 and abs(r45 - 45 / 5.5) <= 1e-12
    report(5, "cost-model ratios", ok,
           f"mu=15: {r15!r} (variant 1: {r15_v1!r}); mu=45: {r45!r} vs {45 / 5.5!r}")


# -- 6 ---------------------------------------------------------------------

def test_c06_calibration_inverse():
    rng = np.random.default_rng(6)
    sigma_fail, steps_fail, infeasible, solved = [], [], 0, 0
    while solved < 50:
        gamma = 10 ** rng.uniform(-3, -1)
        steps = int(10 ** rng.uniform(1, 3.7))
        target = PrivacyTarget(rng.uniform(0.5, 8), 10 ** rng.uniform(-7, -3))
        try:
            s = calibrate_sigma(gamma, steps, target)
        except NoSolutionError:
            # must be a genuine no-solution: even the largest σ misses the target
            if forward_epsilon(gamma, SIGMA_BRACKET[1], steps, target.delta) <= target.epsilon:
                sigma_fail.append((gamma, steps, "spurious no-solution"))
            infeasible += 1
            continue
        solved += 1
        meets = forward_epsilon(gamma, s, steps, target.delta) <= target.epsilon
        tight = s * (1 - 1e-3) < SIGMA_BRACKET[0] or \
            forward_epsilon(gamma, s * (1 - 1e-3), steps, target.delta) > target.epsilon
        if not (meets and tight):
            sigma_fail.append((gamma, steps, s))

    for _ in range(50):
        gamma = 10 ** rng.uniform(-3, -1)
        sigma = rng.uniform(0.7, 5.0)
        target = PrivacyTarget(rng.uniform(0.5, 8), 10 ** rng.uniform(-7, -3))
        t = calibrate_steps(gamma, sigma, target)
        ok_t = t == 0 or forward_epsilon(gamma, sigma, t, target.delta) <= target.epsilon
        ok_next = forward_epsilon(gamma, sigma, t + 1, target.delta) > target.epsilon
        if not (ok_t and ok_next):
            steps_fail.append((gamma, sigma, t))

    report(6, "calibration inverse consistency", not sigma_fail and not steps_fail,
           f"sigma: 50 solved ({infeasible} infeasible draws confirmed and redrawn), "
           f"{len(sigma_fail)} failures; steps: 50 checked, {len(steps_fail)} failures")


# -- 7 ---------------------------------------------------------------------

def test_c07_noise_preservation():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        p = HyperParams(10 ** rng.uniform(-4, 1), 10 ** rng.uniform(-2, 1), 10 ** rng.uniform(-3, 0),
                        int(rng.integers(1, 10_000)))
        sigma = rng.uniform(0.3, 20)
        m, n = (int(v) for v in rng.integers(1, 10**6, size=2))
        before = injected_noise_variance(p.eta, sigma, p.clip, p.gamma, m, p.steps)
        q = extrapolate(p, m, n)
        after = injected_noise_variance(q.eta, sigma, q.clip, q.gamma, n, q.steps)
        worst = max(worst, abs(after - before) / before)
    report(7, "noise preserved by extrapolation", worst <= 1e-12,
           f"max relative change {worst:.1e} over 100 cases")


# -- 8 ---------------------------------------------------------------------

def _mixture(weight, mean, sa, sb):
    lw, lv = math.log(weight), math.log1p(-weight)
    da, db = norm(mean, sa), norm(mean, sb)
    return lambda x: logsumexp([lw + da.logpdf(x), lv + db.logpdf(x)], axis=0)


def test_c08_mixture_divergence():
    rng = np.random.default_rng(8)
    worst_margin, violations = -math.inf, 0
    for _ in range(20):
        sa, sb = rng.uniform(0.8, 4.0, size=2)
        w = rng.uniform(0.05, 0.95)
        for alpha in (2, 4, 8, 16):
            span = 60 + 40 * alpha
            d_mix = renyi_divergence_quadrature(_mixture(w, 1.0, sa, sb), _mixture(w, 0.0, sa, sb),
                                                alpha, -span, span)
            worst = max(gaussian_rdp(sa, 1.0, alpha), gaussian_rdp(sb, 1.0, alpha))
            worst_margin = max(worst_margin, d_mix - worst)
            violations += d_mix > worst * (1 + 1e-9)
    report(8, "mixture divergence <= worst component", violations == 0,
           f"20 mixtures x 4 orders, {violations} violations, largest (mixture - max) {worst_margin:.2e}")


# -- 9 and 10 --------------------------------------------------------------

def _simulate(config, replications, seed, out_dir):
    path = Path(out_dir) / "config.json"
    path.write_text(json.dumps(config))
    code = cli.main(["simulate", "--config", str(path), "--replications", str(replications),
                     "--seed", str(seed), "--out", str(Path(out_dir) / "out")],
                    out=io.StringIO(), err=io.StringIO())
    assert code == 0
    return Path(out_dir) / "out"


@pytest.mark.slow
def test_c09_end_to_end_simulation():
    start = time.perf_counter()
    with tempfile.TemporaryDirectory() as tmp:
        out = _simulate(SIM_CONFIG, 10, SIM_CONFIG["seed"], tmp)
        rows = {r["variant"]: r for r in csv.DictReader((out / "aggregate.csv").open())}
    base = rows["baseline"]
    details, ok = [], True
    for name in ("variant1", "variant2"):
        r = rows[name]
        acc_ok = float(r["mean_score"]) >= float(base["mean_score"]) - 0.02
        eps_ok = float(r["final_epsilon"]) < float(base["final_epsilon"])
        speedup = float(base["mean_gradient_evals"]) / float(r["mean_gradient_evals"])
        ok &= acc_ok and eps_ok and speedup >= 5
        details.append(f"{name}: acc {float(r['mean_score']):.4f}, eps {float(r['final_epsilon']):.3f}, "
                       f"{speedup:.1f}x fewer grads")
    details.insert(0, f"baseline: acc {float(base['mean_score']):.4f}, eps {float(base['final_epsilon']):.3f}")
    elapsed = time.perf_counter() - start
    report(9, "end-to-end simulation", ok, "; ".join(details) + f"; {elapsed:.0f}s")


@pytest.mark.slow
def test_c10_replay_determinism():
    with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
        out_a = _simulate(SIM_CONFIG, 2, 99, a)
        out_b = _simulate(SIM_CONFIG, 2, 99, b)
        names = sorted(p.name for p in out_a.iterdir())
        same = names == sorted(p.name for p in out_b.iterdir()) and all(
            (out_a / n).read_bytes() == (out_b / n).read_bytes() for n in names)
    report(10, "byte-identical simulate replay", same, f"{len(names)} files compared")


if __name__ == "__main__":
    import sys
    sys.exit(pytest.main([__file__, "-q"]))

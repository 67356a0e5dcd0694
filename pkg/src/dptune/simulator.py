"""Desk-scale simulation of private hyperparameter tuning.

Logistic regression on two Gaussian blobs stands in for a real benchmark.
Candidates are trained with DP-SGD (or Adam on DP-SGD gradients) using
Poisson-sampled mini-batches, and a Poisson(μ) number of them is drawn for
random search.  Privacy is never computed here: every reported ε comes from
:mod:`dptune.tuning`.

RNG streams
-----------
One root seed feeds a :class:`numpy.random.SeedSequence`.  Child streams are
addressed by spawn key so that they do not depend on evaluation order:

* ``(0,)`` selects the tuning subset X₁,
* ``(1,)`` draws K and the candidate picks,
* ``(2, i)`` trains the i-th drawn candidate,
* ``(3,)`` trains the final model.

Candidates may therefore be trained concurrently without changing results.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .calibration import GridPoint, forward_curve, grid_uniform_curve
from .errors import DomainError
from .extrapolation import HyperParams, Optimizer, extrapolate
from .rdp_core import AlphaGrid, PrivacyTarget, RdpCurve
from .tuning import CostModel, TuningConfig, Variant, expected_cost, pipeline_epsilon

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class SyntheticTask:
    n: int = 5000
    dim: int = 2
    class_separation: float = 3.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 10:
            raise DomainError(f"n must be >= 10, got {self.n}")
        if self.dim < 1:
            raise DomainError(f"dim must be >= 1, got {self.dim}")


@dataclass(frozen=True, eq=False)
class Dataset:
    """Features carry a trailing column of ones for the bias; labels are 0/1."""

    x_train: np.ndarray
    y_train: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray

    @property
    def n_train(self) -> int:
        return len(self.y_train)

    def restrict(self, mask: np.ndarray) -> "Dataset":
        """Same test split, training rows limited to ``mask``."""
        return Dataset(self.x_train[mask], self.y_train[mask], self.x_test, self.y_test)


def make_task(spec: SyntheticTask) -> Dataset:
    """Two unit-variance Gaussian blobs whose means are ``class_separation`` apart.

    The Bayes-optimal accuracy is Φ(separation / 2).  80% of the rows go to
    the (private) training split, 20% to the (public) test split.
    """
    rng = np.random.default_rng(spec.seed)
    y = rng.integers(0, 2, size=spec.n).astype(float)
    direction = np.ones(spec.dim) / math.sqrt(spec.dim)
    x = rng.standard_normal((spec.n, spec.dim)) + np.outer(y - 0.5, direction) * spec.class_separation
    x = np.hstack([x, np.ones((spec.n, 1))])
    order = rng.permutation(spec.n)
    n_train = int(round(0.8 * spec.n))
    tr, te = order[:n_train], order[n_train:]
    return Dataset(x[tr], y[tr], x[te], y[te])


def logistic_grads(theta, x, y):
    """Per-example gradients of the logistic loss, one row per example."""
    z = x @ theta
    p = 0.5 * (1.0 + np.tanh(0.5 * z))
    return (p - y)[:, None] * x


def accuracy(theta, x, y) -> float:
    if not np.all(np.isfinite(theta)):
        return 0.0
    return float(np.mean((x @ theta > 0) == (y > 0.5)))


def clip_gradient(g, clip):
    """Scale ``g`` down to L2 norm ``clip`` if it is longer."""
    if not clip > 0:
        raise DomainError(f"clip must be > 0, got {clip}")
    g = np.asarray(g, dtype=float)
    norm = np.linalg.norm(g)
    return g if norm <= clip else g * (clip / norm)


def clip_rows(grads, clip):
    norms = np.linalg.norm(grads, axis=1)
    scale = np.minimum(1.0, clip / np.maximum(norms, np.finfo(float).tiny))
    return grads * scale[:, None]


def noisy_gradient(theta, batch, clip, sigma, rng, expected_batch_size,
                   grad_fn: Callable = logistic_grads):
    """Sum of clipped per-example gradients plus N(0, σ²C²), divided by |B|.

    |B| is the expected batch size, not the realised one.
    """
    x, y = batch
    total = clip_rows(grad_fn(theta, x, y), clip).sum(axis=0) if len(y) else np.zeros_like(theta)
    noise = rng.standard_normal(theta.shape) * (sigma * clip) if sigma > 0 else 0.0
    return (total + noise) / expected_batch_size


def dp_sgd_step(theta, batch, params: HyperParams, sigma, rng, expected_batch_size,
                grad_fn: Callable = logistic_grads):
    g = noisy_gradient(theta, batch, params.clip, sigma, rng, expected_batch_size, grad_fn)
    return theta - params.eta * g


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    def step(self, theta, grad, eta):
        self.t += 1
        self.m = ADAM_BETA1 * self.m + (1 - ADAM_BETA1) * grad
        self.v = ADAM_BETA2 * self.v + (1 - ADAM_BETA2) * grad**2
        m_hat = self.m / (1 - ADAM_BETA1**self.t)
        v_hat = self.v / (1 - ADAM_BETA2**self.t)
        return theta - eta * m_hat / (np.sqrt(v_hat) + ADAM_EPS)


@dataclass(frozen=True, eq=False)
class TrialRecord:
    params: HyperParams
    sigma: float
    score: float
    seed: int
    steps_run: int
    gradient_evals: int = 0
    theta: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise DomainError(f"score must lie in [0, 1], got {self.score}")

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "sigma": self.sigma,
            "score": self.score,
            "seed": self.seed,
            "steps_run": self.steps_run,
            "gradient_evals": self.gradient_evals,
            "theta": None if self.theta is None else self.theta.tolist(),
        }


def _seed_int(seed_seq: np.random.SeedSequence) -> int:
    return int(seed_seq.generate_state(1, dtype=np.uint64)[0])


def train_candidate(dataset: Dataset, params: HyperParams, sigma: float, seed: int,
                    theta0: np.ndarray | None = None) -> TrialRecord:
    """Run ``params.steps`` Poisson-sampled DP steps and score on the test split.

    A run that produces non-finite weights is a legitimate tuning outcome: it
    is stopped and recorded with score 0.
    """
    rng = np.random.default_rng(seed)
    n = dataset.n_train
    d = dataset.x_train.shape[1]
    theta = np.zeros(d) if theta0 is None else np.array(theta0, dtype=float)
    expected = params.gamma * n
    evals = 0
    steps_run = 0
    if n > 0:
        adam = AdamState(np.zeros(d), np.zeros(d)) if params.optimizer is Optimizer.ADAM else None
        for _ in range(params.steps):
            idx = np.flatnonzero(rng.random(n) < params.gamma)
            batch = (dataset.x_train[idx], dataset.y_train[idx])
            evals += idx.size
            steps_run += 1
            if adam is None:
                theta = dp_sgd_step(theta, batch, params, sigma, rng, expected)
            else:
                g = noisy_gradient(theta, batch, params.clip, sigma, rng, expected)
                theta = adam.step(theta, g, params.eta)
            if not np.all(np.isfinite(theta)):
                break
    score = accuracy(theta, dataset.x_test, dataset.y_test)
    return TrialRecord(params, sigma, score, seed, steps_run, evals, theta)


def poisson_sample(mu: float, rng: np.random.Generator) -> int:
    if not mu > 0:
        raise DomainError(f"mu must be > 0, got {mu}")
    return int(rng.poisson(mu))


@dataclass(frozen=True, eq=False)
class CandidateGrid:
    """Hyperparameter candidates with their noise multipliers and a shared RDP bound."""

    candidates: tuple
    sigmas: tuple
    curve: RdpCurve

    def __len__(self):
        return len(self.candidates)

    @property
    def mean_epochs(self) -> float:
        return float(np.mean([p.gamma * p.steps for p in self.candidates]))


def fixed_noise_grid(learning_rates: Sequence[float], gamma: float, steps: int, sigma: float,
                     clip: float = 1.0, optimizer=Optimizer.SGD,
                     grid: AlphaGrid | None = None) -> CandidateGrid:
    """Learning-rate search at fixed (γ, σ, T): every candidate has the same curve."""
    cands = tuple(HyperParams(eta, clip, gamma, steps, optimizer) for eta in learning_rates)
    return CandidateGrid(cands, (sigma,) * len(cands), forward_curve(gamma, sigma, steps, grid))


def calibrated_grid(learning_rates: Sequence[float], points: Sequence[GridPoint],
                    target: PrivacyTarget, clip: float = 1.0, optimizer=Optimizer.SGD,
                    grid: AlphaGrid | None = None) -> CandidateGrid:
    """Joint search over η and (γ, T) with σ calibrated per (γ, T) to ``target``."""
    sigmas, curve = grid_uniform_curve(points, target, grid)
    cands, sig = [], []
    for p, s in zip(points, sigmas):
        for eta in learning_rates:
            cands.append(HyperParams(eta, clip, p.gamma, p.steps, optimizer))
            sig.append(s)
    return CandidateGrid(tuple(cands), tuple(sig), curve)


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    variant: Variant
    final_epsilon: float
    delta: float
    final_score: float
    expected_cost: float
    actual_gradient_evals: int
    trials: tuple
    k: int
    chosen: HyperParams
    final_params: HyperParams
    mu: float
    q: float

    def to_dict(self) -> dict:
        return {
            "variant": self.variant.value,
            "final_epsilon": self.final_epsilon,
            "delta": self.delta,
            "final_score": self.final_score,
            "expected_cost": self.expected_cost,
            "actual_gradient_evals": self.actual_gradient_evals,
            "k": self.k,
            "mu": self.mu,
            "q": self.q,
            "chosen": self.chosen.to_dict(),
            "final_params": self.final_params.to_dict(),
            "trials": [t.to_dict() for t in self.trials],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def trials_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["variant", "trial", "eta", "clip", "gamma", "steps", "optimizer",
                    "sigma", "score", "seed", "steps_run", "gradient_evals"])
        for i, t in enumerate(self.trials):
            p = t.params
            w.writerow([self.variant.value, i, repr(p.eta), repr(p.clip), repr(p.gamma), p.steps,
                        p.optimizer.value, repr(t.sigma), repr(t.score), t.seed, t.steps_run,
                        t.gradient_evals])
        return buf.getvalue()


def _random_search(data: Dataset, candidates: CandidateGrid, mu: float,
                   root: np.random.SeedSequence, pick_rng: np.random.Generator):
    k = poisson_sample(mu, pick_rng)
    picks = pick_rng.integers(0, len(candidates), size=max(k, 1))
    if k == 0:
        # no run: an arbitrary candidate paired with the untrained model
        i = int(picks[0])
        d = data.x_train.shape[1]
        theta = np.zeros(d)
        rec = TrialRecord(candidates.candidates[i], candidates.sigmas[i],
                          accuracy(theta, data.x_test, data.y_test), 0, 0, 0, theta)
        return 0, [], rec
    trials = []
    for j, i in enumerate(picks):
        seed = _seed_int(np.random.SeedSequence(root.entropy, spawn_key=(2, j)))
        trials.append(train_candidate(data, candidates.candidates[i], candidates.sigmas[i], seed))
    best = max(trials, key=lambda t: t.score)  # first best on ties
    return k, trials, best


def run_tuning(dataset: Dataset, config: TuningConfig, candidates: CandidateGrid, seed: int,
               delta: float = 1e-5, warm_start: bool = False) -> ExperimentReport:
    """One private tuning run of ``config.variant``; the returned report is deterministic in ``seed``."""
    variant = Variant(config.variant)
    root = np.random.SeedSequence(seed)
    pick_rng = np.random.default_rng(np.random.SeedSequence(root.entropy, spawn_key=(1,)))
    n = dataset.n_train

    if variant is Variant.BASELINE:
        k, trials, best = _random_search(dataset, candidates, config.mu, root, pick_rng)
        final_score, chosen, final_params = best.score, best.params, best.params
        evals = sum(t.gradient_evals for t in trials)
    else:
        subset_rng = np.random.default_rng(np.random.SeedSequence(root.entropy, spawn_key=(0,)))
        in_subset = subset_rng.random(n) < config.q
        m = int(in_subset.sum())
        tune_data = dataset.restrict(in_subset)
        final_data = dataset if variant is Variant.VARIANT2 else dataset.restrict(~in_subset)
        k, trials, best = _random_search(tune_data, candidates, config.mu, root, pick_rng)
        chosen = best.params
        final_params = extrapolate(chosen, max(m, 1), max(final_data.n_train, 1))
        final_seed = _seed_int(np.random.SeedSequence(root.entropy, spawn_key=(3,)))
        theta0 = best.theta if warm_start else None
        final = train_candidate(final_data, final_params, best.sigma, final_seed, theta0)
        final_score = final.score
        evals = sum(t.gradient_evals for t in trials) + final.gradient_evals

    eps = pipeline_epsilon(variant, candidates.curve, config.mu, config.q, delta)
    cost = expected_cost(CostModel(n, candidates.mean_epochs, config.mu, config.q),
                         variant).gradient_evals
    return ExperimentReport(variant, eps, delta, final_score, cost, int(evals), tuple(trials), k,
                            chosen, final_params, config.mu, config.q)

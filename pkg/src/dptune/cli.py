"""Command-line front end: ``dptune {account,calibrate,compare-variants,simulate}``.

Exit codes: 0 ok, 2 usage, 3 infeasible calibration target, 4 bad config.
All numbers printed come from library calls.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import contextlib
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import calibration, plotting
from .errors import DomainError, NoSolutionError
from .mechanisms import Gaussian, SubsampledGaussian, dp_sgd, mechanism_curve
from .rdp_core import AlphaGrid, PrivacyTarget, compose, rdp_to_dp
from .simulator import (
    SyntheticTask,
    calibrated_grid,
    fixed_noise_grid,
    make_task,
    run_tuning,
)
from .calibration import GridPoint
from .extrapolation import Optimizer
from .tuning import TuningConfig, Variant, tuning_rdp, variant1_curve, variant2_curve

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_CONFIG = 0, 2, 3, 4
THREADS_ENV = "DP_TUNE_THREADS"


class UsageError(Exception):
    pass


class ConfigError(Exception):
    pass


def _write(path, text):
    """Write atomically: readers never see a partial file."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


# -- account ---------------------------------------------------------------

def cmd_account(args, out=sys.stdout):
    grid = AlphaGrid.default(args.alpha_max)
    if args.mechanism == "gaussian":
        spec = Gaussian(args.sigma, args.sensitivity)
    else:
        if args.gamma is None:
            raise UsageError("--gamma is required for the subsampled mechanism")
        spec = SubsampledGaussian(args.sigma, args.gamma)
    curve = compose(mechanism_curve(spec, grid), args.steps)
    eps, order = rdp_to_dp(curve, args.delta, return_order=True)
    out.write(curve.to_csv())
    order_txt = "none" if order is None else f"{order:g}"
    out.write(f"epsilon={eps!r} delta={args.delta!r} order={order_txt}\n")
    return EXIT_OK


# -- calibrate -------------------------------------------------------------

def cmd_calibrate(args, out=sys.stdout):
    modes = [args.steps is not None and args.alpha_line is None, args.sigma is not None,
             args.grid is not None, args.alpha_line is not None]
    if sum(modes) != 1:
        raise UsageError("give exactly one of --steps, --sigma, --grid or --alpha-line")

    if args.alpha_line is not None:
        if args.gamma is None or args.steps is None:
            raise UsageError("--alpha-line needs --gamma and --steps")
        sigma = calibration.calibrate_sigma_alpha_line(args.gamma, args.steps, args.alpha_line)
        grid = AlphaGrid.integers()
        ok = calibration.alpha_line_holds(args.gamma, sigma, args.steps, args.alpha_line, grid)
        out.write(f"sigma={sigma!r}\n")
        out.write(f"check: T*eps(alpha) <= {args.alpha_line!r}*alpha for alpha in 2..64: {ok}\n")
        return EXIT_OK

    if args.target_eps is None or args.delta is None:
        raise UsageError("--target-eps and --delta are required")
    target = PrivacyTarget(args.target_eps, args.delta)

    if args.grid is not None:
        try:
            points = calibration.load_grid(args.grid)
        except (OSError, json.JSONDecodeError, DomainError) as exc:
            raise ConfigError(str(exc)) from exc
        sigmas, _ = calibration.grid_uniform_curve(points, target)
        out.write(calibration.calibration_report_csv(points, sigmas, target.delta))
        return EXIT_OK

    if args.gamma is None:
        raise UsageError("--gamma is required")
    if args.steps is not None:
        sigma = calibration.calibrate_sigma(args.gamma, args.steps, target)
        eps = calibration.forward_epsilon(args.gamma, sigma, args.steps, target.delta)
        lower = sigma * (1 - 10 * calibration.RTOL)
        eps_lower = calibration.forward_epsilon(args.gamma, lower, args.steps, target.delta)
        out.write(f"sigma={sigma!r}\n")
        out.write(f"check: eps(sigma)={eps!r} <= {target.epsilon!r}; "
                  f"eps(sigma*(1-1e-3))={eps_lower!r}\n")
    else:
        steps = calibration.calibrate_steps(args.gamma, args.sigma, target)
        if steps == 0:
            raise NoSolutionError("target not met even for a single step")
        eps = calibration.forward_epsilon(args.gamma, args.sigma, steps, target.delta)
        eps_next = calibration.forward_epsilon(args.gamma, args.sigma, steps + 1, target.delta)
        out.write(f"steps={steps}\n")
        out.write(f"check: eps(T)={eps!r} <= {target.epsilon!r}; eps(T+1)={eps_next!r}\n")
    return EXIT_OK


# -- compare-variants ------------------------------------------------------

def parse_q_grid(text: str) -> list[float]:
    """``0.05,0.1,0.2`` or ``start:stop:step`` (stop inclusive)."""
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + i * step, 12) for i in range(count)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"cannot parse --q-grid {text!r}") from exc


def compare_variants_rows(gamma, sigma, epochs, mu, delta, qs, grid=None):
    steps = int(round(epochs / gamma))
    base = mechanism_curve(dp_sgd(sigma, gamma, steps), grid)
    tuned = tuning_rdp(base, mu)
    eps_base = rdp_to_dp(tuned, delta)
    rows = []
    for q in qs:
        rows.append((q, eps_base,
                     rdp_to_dp(variant1_curve(tuned, base, q), delta),
                     rdp_to_dp(variant2_curve(tuned, base, q), delta)))
    return rows


def cmd_compare_variants(args, out=sys.stdout):
    qs = parse_q_grid(args.q_grid)
    if not qs:
        raise UsageError("--q-grid is empty")
    rows = compare_variants_rows(args.gamma, args.sigma, args.epochs, args.mu, args.delta, qs)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["q", "eps_baseline", "eps_variant1", "eps_variant2"])
    for r in rows:
        w.writerow([repr(v) for v in r])
    text = buf.getvalue()
    if args.csv:
        _write(args.csv, text)
    else:
        out.write(text)
    if args.svg:
        q = [r[0] for r in rows]
        series = {"baseline": [r[1] for r in rows], "variant 1": [r[2] for r in rows],
                  "variant 2": [r[3] for r in rows]}
        _write(args.svg, plotting.line_plot_svg(
            q, series, xlabel="q", ylabel=f"epsilon at delta={args.delta:g}",
            title=f"mu={args.mu:g}, gamma={args.gamma:g}, sigma={args.sigma:g}, epochs={args.epochs:g}"))
    return EXIT_OK


# -- simulate --------------------------------------------------------------

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["task", "tuning", "grid"],
    "additionalProperties": False,
    "properties": {
        "task": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n": {"type": "integer", "minimum": 10},
                "dim": {"type": "integer", "minimum": 1},
                "class_separation": {"type": "number", "minimum": 0},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "tuning": {
            "type": "object",
            "required": ["mu", "q"],
            "additionalProperties": False,
            "properties": {
                "mu": {"type": "number", "exclusiveMinimum": 0},
                "q": {"type": "number", "minimum": 0, "maximum": 1},
                "variants": {
                    "type": "array", "minItems": 1, "uniqueItems": True,
                    "items": {"enum": [v.value for v in Variant]},
                },
            },
        },
        "grid": {
            "type": "object",
            "required": ["learning_rates"],
            "additionalProperties": False,
            "properties": {
                "learning_rates": {"type": "array", "minItems": 1,
                                   "items": {"type": "number", "exclusiveMinimum": 0}},
                "clip": {"type": "number", "exclusiveMinimum": 0},
                "optimizer": {"enum": [o.value for o in Optimizer]},
                "gamma": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "epochs": {"type": "number", "exclusiveMinimum": 0},
                "sigma": {"type": "number", "exclusiveMinimum": 0},
                "points": {
                    "type": "array", "minItems": 1,
                    "items": {
                        "type": "object", "required": ["gamma", "epochs"],
                        "additionalProperties": False,
                        "properties": {
                            "gamma": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                            "epochs": {"type": "number", "exclusiveMinimum": 0},
                        },
                    },
                },
                "target": {
                    "type": "object", "required": ["epsilon", "delta"],
                    "additionalProperties": False,
                    "properties": {
                        "epsilon": {"type": "number", "exclusiveMinimum": 0},
                        "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
                    },
                },
            },
            "oneOf": [
                {"required": ["gamma", "epochs", "sigma"], "not": {"required": ["points"]}},
                {"required": ["points", "target"], "not": {"required": ["sigma"]}},
            ],
        },
        "delta": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "warm_start": {"type": "boolean"},
    },
}


def load_config(path) -> dict:
    import jsonschema

    try:
        with open(path) as fh:
            config = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(config, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config {where}: {exc.message}") from exc
    return config


def build_experiment(config: dict):
    """Dataset, candidate grid and per-variant tuning configs for a parsed config."""
    task = SyntheticTask(**config.get("task", {}))
    g = config["grid"]
    clip = g.get("clip", 1.0)
    opt = Optimizer(g.get("optimizer", "sgd"))
    if "points" in g:
        points = [GridPoint.from_epochs(p["gamma"], p["epochs"]) for p in g["points"]]
        target = PrivacyTarget(g["target"]["epsilon"], g["target"]["delta"])
        candidates = calibrated_grid(g["learning_rates"], points, target, clip, opt)
    else:
        steps = int(round(g["epochs"] / g["gamma"]))
        candidates = fixed_noise_grid(g["learning_rates"], g["gamma"], steps, g["sigma"], clip, opt)
    t = config["tuning"]
    variants = [Variant(v) for v in t.get("variants", [v.value for v in Variant])]
    configs = [TuningConfig(t["mu"], t["q"], v) for v in variants]
    return make_task(task), candidates, configs


def replication_seed(seed: int, rep: int) -> int:
    ss = np.random.SeedSequence(seed, spawn_key=(rep,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _run_replication(config: dict, seed: int, rep: int):
    dataset, candidates, configs = build_experiment(config)
    rseed = replication_seed(seed, rep)
    delta = config.get("delta", 1e-5)
    warm = config.get("warm_start", False)
    return [run_tuning(dataset, c, candidates, rseed, delta, warm) for c in configs]


def _threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def aggregate(reports_by_rep) -> list[dict]:
    """Mean score, its standard error, and bookkeeping per variant."""
    by_variant: dict[str, list] = {}
    for reports in reports_by_rep:
        for r in reports:
            by_variant.setdefault(r.variant.value, []).append(r)
    rows = []
    for name, reps in by_variant.items():
        scores = np.array([r.final_score for r in reps])
        sem = float(scores.std(ddof=1) / math.sqrt(len(scores))) if len(scores) > 1 else 0.0
        rows.append({
            "variant": name,
            "replications": len(reps),
            "final_epsilon": reps[0].final_epsilon,
            "mean_score": float(scores.mean()),
            "stderr_score": sem,
            "mean_gradient_evals": float(np.mean([r.actual_gradient_evals for r in reps])),
            "expected_cost": reps[0].expected_cost,
        })
    return rows


AGGREGATE_COLUMNS = ["variant", "replications", "final_epsilon", "mean_score", "stderr_score",
                     "mean_gradient_evals", "expected_cost"]


def cmd_simulate(args, out=sys.stdout):
    if args.replications < 1:
        raise ConfigError("--replications must be >= 1")
    config = load_config(args.config)
    try:
        build_experiment(config)
    except (DomainError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    seed = args.seed if args.seed is not None else config.get("seed", 0)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)

    reps = range(args.replications)
    workers = min(_threads(), args.replications)
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_run_replication, [config] * len(reps), [seed] * len(reps), reps))
    else:
        results = [_run_replication(config, seed, r) for r in reps]

    trial_rows = []
    for rep, reports in zip(reps, results):
        payload = {"replication": rep, "seed": replication_seed(seed, rep),
                   "reports": [r.to_dict() for r in reports]}
        _write(outdir / f"replication_{rep:03d}.json", json.dumps(payload, indent=2, sort_keys=True))
        for r in reports:
            body = r.trials_csv().splitlines()[1:]
            trial_rows.extend(f"{rep},{line}" for line in body)

    header = "replication," + ",".join(
        ["variant", "trial", "eta", "clip", "gamma", "steps", "optimizer", "sigma", "score",
         "seed", "steps_run", "gradient_evals"])
    _write(outdir / "trials.csv", "\n".join([header] + trial_rows) + "\n")

    rows = aggregate(results)
    buf = io.StringIO()
    w = csv.DictWriter(buf, AGGREGATE_COLUMNS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    _write(outdir / "aggregate.csv", buf.getvalue())
    _write(outdir / "score_vs_epsilon.svg", plotting.scatter_errorbar_svg(
        [r["final_epsilon"] for r in rows], [r["mean_score"] for r in rows],
        [r["stderr_score"] for r in rows], [r["variant"] for r in rows],
        xlabel="final epsilon", ylabel="mean test accuracy"))
    out.write(buf.getvalue())
    return EXIT_OK


# -- entry point -----------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dptune", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("account", help="RDP curve and (epsilon, delta) of a mechanism")
    p.add_argument("--mechanism", choices=["gaussian", "subsampled"], required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--gamma", type=float)
    p.add_argument("--sensitivity", type=float, default=1.0)
    p.add_argument("--steps", type=int, default=1)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--alpha-max", type=int, default=64)
    p.set_defaults(func=cmd_account)

    p = sub.add_parser("calibrate", help="solve for sigma or steps meeting a target")
    p.add_argument("--target-eps", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--steps", type=int)
    p.add_argument("--sigma", type=float)
    p.add_argument("--grid", help="JSON list of {gamma, epochs, n}")
    p.add_argument("--alpha-line", type=float, metavar="C")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("compare-variants", help="epsilon of baseline and both variants over q")
    p.add_argument("--gamma", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--epochs", type=float, required=True)
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--q-grid", required=True)
    p.add_argument("--csv", help="write CSV here instead of stdout")
    p.add_argument("--svg", help="also write a line plot")
    p.set_defaults(func=cmd_compare_variants)

    p = sub.add_parser("simulate", help="run the tuning simulation")
    p.add_argument("--config", required=True)
    p.add_argument("--replications", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default="simulation_out")
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None, out=sys.stdout, err=sys.stderr) -> int:
    parser = build_parser()
    try:
        with contextlib.redirect_stderr(err), contextlib.redirect_stdout(out):
            args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out=out)
    except NoSolutionError as exc:
        err.write(f"dptune: infeasible: {exc}\n")
        return EXIT_INFEASIBLE
    except ConfigError as exc:
        err.write(f"dptune: config error: {exc}\n")
        return EXIT_CONFIG
    except (UsageError, DomainError) as exc:
        err.write(f"dptune: error: {exc}\n")
        return EXIT_USAGE


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()

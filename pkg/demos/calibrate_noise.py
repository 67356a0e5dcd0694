"""Noise calibration: σ for a budget, steps for a fixed σ, and a whole grid at once."""

from dptune import (
    GridPoint,
    PrivacyTarget,
    calibrate_sigma,
    calibrate_steps,
    forward_epsilon,
    grid_uniform_curve,
    rdp_to_dp,
)

target = PrivacyTarget(2.0, 1e-5)

sigma = calibrate_sigma(0.01, 5000, target)
print(f"sigma for gamma=0.01, T=5000: {sigma:.4f} "
      f"(check eps={forward_epsilon(0.01, sigma, 5000, target.delta):.4f})")

steps = calibrate_steps(0.01, 2.0, target)
print(f"steps affordable at sigma=2: {steps}")

# every candidate calibrated to the same budget; their envelope bounds the tuning run
points = [GridPoint.from_epochs(g, e) for g in (0.005, 0.01, 0.02) for e in (5, 20)]
sigmas, envelope = grid_uniform_curve(points, target)
for p, s in zip(points, sigmas):
    print(f"  gamma={p.gamma:<6} steps={p.steps:<5} sigma={s:.4f}")
# above the target: the worst order differs between candidates
print(f"envelope of {len(points)} candidates converts to eps={rdp_to_dp(envelope, target.delta):.3f}")

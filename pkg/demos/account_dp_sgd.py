"""Privacy of a plain DP-SGD run, order by order.

Run: python3 demos/account_dp_sgd.py
"""

from dptune import AlphaGrid, compose, gaussian_curve, rdp_to_dp, subsample_curve

SIGMA, GAMMA, STEPS, DELTA = 1.1, 256 / 60000, 60 * 60000 // 256, 1e-5

grid = AlphaGrid.integers(64)
step = subsample_curve(gaussian_curve(SIGMA, grid=grid), GAMMA)
total = compose(step, STEPS)

print(f"sigma={SIGMA} gamma={GAMMA:.5f} steps={STEPS}")
for alpha in (2, 4, 8, 16, 32, 64):
    print(f"  alpha={alpha:>2}  per-step {step.at(alpha):.3e}  total {total.at(alpha):.4f}")

eps, order = rdp_to_dp(total, DELTA, return_order=True)
print(f"(eps, delta) = ({eps:.3f}, {DELTA}) at order {order:g}")

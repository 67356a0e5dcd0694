"""Final ε of the three tuning pipelines as the subset fraction q grows.

The baseline tunes on the full data; variant 1 tunes on a random q-fraction and
retrains on the rest; variant 2 tunes on the subset and retrains on everything.

Run: python3 demos/compare_variants.py
"""

import numpy as np

from dptune import CostModel, expected_cost
from dptune.calibration import forward_curve
from dptune.tuning import pipeline_epsilon

GAMMA, SIGMA, EPOCHS, DELTA, N = 0.01, 2.0, 50, 1e-5, 10_000
base = forward_curve(GAMMA, SIGMA, int(EPOCHS / GAMMA))

for mu in (15, 45):
    baseline = pipeline_epsilon("baseline", base, mu, 0.0, DELTA)
    print(f"mu={mu}: baseline eps {baseline:.3f}")
    print("     q   variant1  variant2   cost ratio v1 / v2")
    for q in np.round(np.arange(0.05, 0.51, 0.05), 2):
        e1 = pipeline_epsilon("variant1", base, mu, q, DELTA)
        e2 = pipeline_epsilon("variant2", base, mu, q, DELTA)
        model = CostModel(N, EPOCHS, mu, q)
        r1 = expected_cost(model, "variant1").ratio
        r2 = expected_cost(model, "variant2").ratio
        print(f"  {q:4.2f}   {e1:8.3f}  {e2:8.3f}   {r1:5.2f} / {r2:5.2f}")

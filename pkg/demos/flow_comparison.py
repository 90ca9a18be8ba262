"""
How the flows trade smoothing against edges
===========================================

Tracks the mean-squared geodesic error on the noisy two-region field as
the flows evolve, separately for voxels near the interface and far from
it, and shows what the edge-stopping parameter k does to self-snakes.
"""

import numpy as np

from spdflow.fieldio import SyntheticSpec, add_noise, generate_synthetic
from spdflow.flows import FLOW_KINDS, FlowConfig, default_k, run_flow
from spdflow.metrics import geodesic_distance

truth = generate_synthetic(SyntheticSpec("two_region", (32, 32)))
noisy = add_noise(truth, 0.3, seed=2024)

near = np.zeros((32, 32), dtype=bool)
near[:, 13:19] = True


def split_error(field):
    d2 = geodesic_distance(field.matrices(), truth.matrices()) ** 2
    return d2[near].mean(), d2[~near].mean()


print("k from the median rule:", round(default_k(noisy, 1.0), 4))
print(f"{'flow':>13} {'step':>5} {'edge mse':>9} {'flat mse':>9}")
for kind in FLOW_KINDS:
    trace = []
    run_flow(noisy, FlowConfig(kind, dt=0.01, steps=100),
             callback=lambda n, f, d: trace.append((n + 1, *split_error(f))) if (n + 1) % 25 == 0 else None)
    for step, edge, flat in trace:
        print(f"{kind:>13} {step:5d} {edge:9.4f} {flat:9.4f}")

# small k stops diffusion almost everywhere; huge k recovers plain curvature flow
for k in (0.05, 0.3, 1.0, 1e12):
    out, _ = run_flow(noisy, FlowConfig("self_snakes", k=k, steps=50))
    edge, flat = split_error(out)
    print(f"self_snakes k={k:<8g} edge mse {edge:.4f}  flat mse {flat:.4f}")

"""
Denoising a two-region tensor field
===================================

A 32 x 32 slice holds two constant anisotropic tensors whose principal
axes differ by 90 degrees.  We add multiplicative noise, run each of the
four flows for 50 steps of 0.01 and compare the results with the ground
truth in the affine-invariant distance.
"""

import numpy as np

from spdflow.fieldio import SyntheticSpec, add_noise, generate_synthetic
from spdflow.flows import FLOW_KINDS, FlowConfig, run_flow
from spdflow.metrics import field_error, volume_energy

truth = generate_synthetic(SyntheticSpec("two_region", (32, 32)))
noisy = add_noise(truth, 0.3, seed=2024)

print(f"truth energy {volume_energy(truth):.1f}, noisy energy {volume_energy(noisy):.1f}")
print(f"noisy: {field_error(noisy, truth).riemannian_mse:.4f}")

results = {}
for kind in FLOW_KINDS:
    out, diag = run_flow(noisy, FlowConfig(kind, dt=0.01, steps=50))
    report = field_error(out, truth)
    results[kind] = out
    print(f"{kind:>13}: mse {report.riemannian_mse:.4f}  worst voxel {report.max_pointwise:.3f}  "
          f"energy {diag.energy[-1]:.1f}  safeguard {diag.total_activations}")

# how sharp is the interface after smoothing?  look at the xx entry along one row
row = 16
print("\ncolumn      " + " ".join(f"{c:6d}" for c in range(12, 20)))
print("truth       " + " ".join(f"{v:6.3f}" for v in truth.data[row, 12:20, 0]))
for kind, out in results.items():
    print(f"{kind:<12}" + " ".join(f"{v:6.3f}" for v in out.data[row, 12:20, 0]))

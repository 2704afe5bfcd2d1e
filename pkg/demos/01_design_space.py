"""Tour of the gripper design space: genotypes, bounds, features.

Run:  python demos/01_design_space.py
"""
import numpy as np

from finray_qd import (
    benchmark_design,
    decode,
    encode,
    features_of,
    validate,
)
from finray_qd.design import to_json

# The optimizer sees a gripper as 28 numbers in [0, 1]: nine per finger
# (in Table order H, L, W, L_tip, t_flex, t_back, N, t_rib, D_angle) plus
# the mount distance. Decoding maps them into physical ranges.
rng = np.random.default_rng(0)
genotype = rng.random(28)
design = decode(genotype)
print("a random design:")
for k, finger in enumerate(design.fingers, start=1):
    print(f"  finger {k}: {finger}")
print(f"  d_mount = {design.d_mount:.2f} mm")

# Encoding inverts decoding; the rib count snaps to its bin centre.
round_trip = decode(encode(design))
print("decode(encode(.)) reproduces the design:", round_trip == design)

# Features place a design in the archive: workspace grows with the mount
# triangle, volume with walls, ribs and extrusion depth.
feats = features_of(design)
print(f"workspace = {feats.workspace:.1f} mm^2, volume = {feats.volume:.1f} mm^3")

# The reference gripper ships with the package. Three of its parameters sit
# outside the optimization ranges, so validation flags them as warnings in
# evaluation-only mode and as errors in strict mode.
bench = benchmark_design()
print("\nreference design warnings (non-strict):")
for violation in validate(bench, strict=False):
    print(f"  [{violation.severity}] {violation.message}")

print("\nserialized form:")
print(to_json(bench))

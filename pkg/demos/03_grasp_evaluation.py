"""Grasp a sphere with one finger, then score a whole gripper on objects.

Run:  python demos/03_grasp_evaluation.py   (about two minutes)
"""
from finray_qd import (
    SimConfig,
    benchmark_design,
    default_object_set,
    evaluate_design,
    grip_simulation,
)
from finray_qd.contact import CircleSilhouette
from finray_qd.grasp import EvalConfig

design = benchmark_design()
finger = design.fingers[0]

# --- one finger against a 15 mm sphere, increasing stroke -------------------
# The sphere sits 1 mm away from the undeformed contact face at two thirds
# of the finger height; the mount then closes horizontally by `stroke`.
print("single-finger squeeze on a 15 mm sphere:")
sphere = CircleSilhouette(center=(-(1.0 + 15.0), 2 / 3 * finger.H), radius=15.0)
for stroke in (2.0, 4.0, 6.0):
    summary = grip_simulation(finger, sphere, stroke, SimConfig())
    print(f"  stroke {stroke:.0f} mm -> total normal force "
          f"{summary.total_normal_force:6.3f} N on {len(summary.contact_nodes)} nodes")

# --- full evaluation ---------------------------------------------------------
# Each object is gripped, then the elapsed-time hold test asks whether the
# friction capacity of the three finger forces keeps it from dropping more
# than 5 mm in one second.
print("\nreference gripper vs the default object set:")
result = evaluate_design(design, default_object_set(), EvalConfig())
for outcome in result.outcomes:
    status = "held" if outcome.held else f"dropped ({outcome.failure_reason})"
    print(f"  {outcome.object_id:<16s} N = {outcome.normal_forces[0]:6.2f} N/finger  {status}")
print(f"success rate: {result.success_rate:.3f}  "
      f"({result.wall_time:.1f} s of simulation)")

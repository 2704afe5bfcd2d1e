"""Grasp scenes, the elapsed-time hold test and the success-rate objective.

Each finger is simulated quasi-statically in its own vertical radial plane
against the object's silhouette (objects are axisymmetric, so all three
planes see the same profile). The object stays fixed while gripping; the
hold phase then reduces it to a single vertical degree of freedom carried
by the friction capacity of the three per-finger normal forces. A grasp
succeeds when the object stays within the drop threshold for the full hold
time.
"""
from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .contact import CircleSilhouette, ConvexPolygonSilhouette
from .design import FingerDesign, GripperDesign, validate
from .errors import (
    ElementInversion,
    EmptyObjectSet,
    GeometryError,
    MeshError,
    StepNotConverged,
    UnknownShape,
)
from .features import FeatureDescriptor, features_of
from .fem import GRAVITY_M_S2
from . import sim as _sim

SHAPES = ("sphere", "cylinder", "cone", "capsule", "ellipsoid")


@dataclass(frozen=True)
class RigidObjectSpec:
    """An axisymmetric rigid object standing on the gripper axis."""

    id: str
    shape: str                      # one of SHAPES
    dimensions: dict                # mm, keys depend on shape
    mass: float                     # kg

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise UnknownShape(f"unknown shape {self.shape!r}")
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if any(v <= 0 for v in self.dimensions.values()):
            raise ValueError("dimensions must be positive")

    @property
    def r_max(self) -> float:
        """Largest radial extent, mm."""
        return float(self.dimensions["radius"])


@dataclass(frozen=True)
class ObjectSet:
    """Ordered collection of target objects with unique ids."""

    objects: tuple[RigidObjectSpec, ...]

    def __post_init__(self):
        if not self.objects:
            raise EmptyObjectSet("object set is empty")
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ValueError("object ids must be unique")
        object.__setattr__(self, "objects", tuple(self.objects))

    def __iter__(self):
        return iter(self.objects)

    def __len__(self):
        return len(self.objects)


def default_object_set() -> ObjectSet:
    """Eight axisymmetric primitives spanning radii 10-30 mm, masses 0.05-0.3 kg.

    The two largest objects sit close to the reach limit of small-mount
    grippers and carry the heaviest masses, so success on them separates
    designs that merely touch from designs that squeeze.
    """
    return ObjectSet(objects=(
        RigidObjectSpec("sphere_small", "sphere", {"radius": 12.0}, 0.05),
        RigidObjectSpec("sphere_large", "sphere", {"radius": 25.0}, 0.25),
        RigidObjectSpec("cylinder_slim", "cylinder", {"radius": 10.0, "height": 50.0}, 0.08),
        RigidObjectSpec("cylinder_wide", "cylinder", {"radius": 26.0, "height": 60.0}, 0.30),
        RigidObjectSpec("cone_cup", "cone", {"radius": 18.0, "height": 45.0}, 0.15),
        RigidObjectSpec("capsule_bottle", "capsule", {"radius": 14.0, "height": 40.0}, 0.12),
        RigidObjectSpec("ellipsoid_egg", "ellipsoid", {"radius": 16.0, "half_height": 24.0}, 0.10),
        RigidObjectSpec("sphere_max", "sphere", {"radius": 30.0}, 0.30),
    ))


def load_object_set(path) -> ObjectSet:
    """Read an object set from a JSON file (list of object records)."""
    with open(path) as fh:
        data = json.load(fh)
    objs = tuple(RigidObjectSpec(id=str(o["id"]), shape=str(o["shape"]),
                                 dimensions={k: float(v) for k, v in o["dimensions"].items()},
                                 mass=float(o["mass"]))
                 for o in data)
    return ObjectSet(objects=objs)


def save_object_set(objects: ObjectSet, path) -> None:
    data = [{"id": o.id, "shape": o.shape, "dimensions": o.dimensions, "mass": o.mass}
            for o in objects]
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2)
        fh.write("\n")


def _arc_points(center, radius, a0, a1, chord_error):
    """Polyline along an arc with sagitta below chord_error."""
    dtheta = 2.0 * np.arccos(max(1.0 - chord_error / radius, -1.0))
    n = max(2, int(np.ceil(abs(a1 - a0) / max(dtheta, 1e-6))))
    angles = np.linspace(a0, a1, n + 1)
    return np.column_stack([center[0] + radius * np.cos(angles),
                            center[1] + radius * np.sin(angles)])


def silhouette(obj: RigidObjectSpec, chord_error: float = 0.5):
    """2D profile of the object in a finger's radial plane, centred on origin.

    The x axis is radial (the gripper axis is x = 0), y is vertical with the
    profile's mid-height at y = 0. Spheres stay analytic circles; curved
    profiles are polygonized with at most ``chord_error`` mm deviation.
    """
    dims = obj.dimensions
    if obj.shape == "sphere":
        return CircleSilhouette(center=(0.0, 0.0), radius=dims["radius"])
    if obj.shape == "cylinder":
        r, h = dims["radius"], dims["height"]
        return ConvexPolygonSilhouette(np.array([
            [-r, -h / 2], [r, -h / 2], [r, h / 2], [-r, h / 2]]))
    if obj.shape == "cone":
        r, h = dims["radius"], dims["height"]
        return ConvexPolygonSilhouette(np.array([
            [-r, -h / 2], [r, -h / 2], [0.0, h / 2]]))
    if obj.shape == "capsule":
        r, h = dims["radius"], dims["height"]   # h = cylindrical section height
        top = _arc_points((0.0, h / 2), r, 0.0, np.pi, chord_error)
        bottom = _arc_points((0.0, -h / 2), r, np.pi, 2.0 * np.pi, chord_error)
        return ConvexPolygonSilhouette(np.vstack([top, bottom]))
    if obj.shape == "ellipsoid":
        r, hh = dims["radius"], dims["half_height"]
        angles = np.linspace(0.0, 2.0 * np.pi, _ellipse_segments(r, hh, chord_error),
                             endpoint=False)
        pts = np.column_stack([r * np.cos(angles), hh * np.sin(angles)])
        return ConvexPolygonSilhouette(pts)
    raise UnknownShape(f"unknown shape {obj.shape!r}")


def _ellipse_segments(r, hh, chord_error) -> int:
    rmax = max(r, hh)
    dtheta = 2.0 * np.arccos(max(1.0 - chord_error / rmax, -1.0))
    return max(12, int(np.ceil(2.0 * np.pi / max(dtheta, 1e-6))))


@dataclass(frozen=True)
class EvalConfig:
    """Scene layout, stroke policy and hold-test parameters."""

    sim: _sim.SimConfig = field(default_factory=_sim.SimConfig)
    clearance: float = 1.0            # mm initial standoff face-to-object
    stroke_max: float = 15.0          # mm actuator travel cap
    hold_time: float = 1.0            # s
    drop_threshold: float = 5.0       # mm
    grasp_height_fraction: float = 2.0 / 3.0
    parallel_objects: int = 1

    def with_overrides(self, **kwargs) -> "EvalConfig":
        return replace(self, **kwargs)


def closing_stroke(design: GripperDesign, obj: RigidObjectSpec,
                   clearance: float = 1.0, stroke_max: float = 15.0) -> float:
    """Actuator stroke per finger: the travel budget left by the object.

    ``max(0, d_mount - r_max - clearance)`` capped at ``stroke_max``;
    identical for all three fingers since objects are axisymmetric.
    """
    return min(max(0.0, design.d_mount - obj.r_max - clearance), stroke_max)


def hold_test(normal_forces, friction_mu: float, mass: float,
              hold_time: float = 1.0, drop_threshold: float = 5.0):
    """Elapsed-time hold: does friction keep the object within the threshold?

    Integrates the object's single vertical degree of freedom from rest
    under gravity with the friction capacity mu * sum(N_i) opposing motion:
    it sticks when the capacity covers the weight, otherwise slides with
    constant acceleration. Returns (held, displacement_mm at hold_time).
    """
    forces = np.asarray(normal_forces, dtype=float)
    if np.any(forces < 0):
        raise ValueError("normal forces must be non-negative")
    if mass <= 0:
        raise ValueError("mass must be positive")
    capacity = friction_mu * float(forces.sum())     # N
    weight = mass * GRAVITY_M_S2                     # N
    if capacity >= weight:
        return True, 0.0
    accel = (weight - capacity) / mass               # m/s^2
    displacement_mm = 0.5 * accel * hold_time ** 2 * 1000.0
    return displacement_mm <= drop_threshold, displacement_mm


@dataclass(frozen=True)
class GraspOutcome:
    """Result of grasping one object with one gripper design."""

    object_id: str
    normal_forces: tuple[float, float, float]   # N, per finger
    held: bool
    displacement: float                          # mm at the end of the hold
    failure_reason: str | None                   # no_contact | slipped | sim_not_converged


@dataclass(frozen=True)
class EvaluationResult:
    """Per-object outcomes plus the success-rate objective and features."""

    design: GripperDesign
    outcomes: tuple[GraspOutcome, ...]
    success_rate: float
    features: FeatureDescriptor
    wall_time: float                             # s

    @property
    def successes(self) -> int:
        return sum(1 for o in self.outcomes if o.held)


def _finger_force(finger: FingerDesign, obj: RigidObjectSpec,
                  design: GripperDesign, cfg: EvalConfig, context=None):
    """Settled normal force of one finger on one object (None if sim failed)."""
    stroke = closing_stroke(design, obj, cfg.clearance, cfg.stroke_max)
    if stroke <= cfg.clearance:
        # the face starts `clearance` away and nothing else pushes the
        # finger toward the object, so contact is impossible
        return 0.0
    profile = silhouette(obj)
    y_center = cfg.grasp_height_fraction * finger.H
    x_center = -(cfg.clearance + obj.r_max)
    placed = profile.shifted((x_center, y_center))
    summary = _sim.grip_simulation(finger, placed, stroke, cfg.sim,
                                   context=context)
    if not summary.converged:
        return None
    return summary.total_normal_force


def evaluate_design(design: GripperDesign, objects: ObjectSet,
                    cfg: EvalConfig = EvalConfig()) -> EvaluationResult:
    """Grasp every object and score the design.

    Identical fingers share one grip simulation per object. Simulation
    failures count the object as failed (reason ``sim_not_converged``);
    design-quality problems never raise out of this function. Feature
    computation and mesh construction errors on pathological geometry also
    mark all objects failed.
    """
    if len(objects) == 0:
        raise EmptyObjectSet("object set is empty")
    validate(design, strict=False)   # warnings only; evaluation-only mode
    start = time.perf_counter()

    # meshing/model setup happens once per distinct finger, shared by all
    # objects; a geometry failure here fails every object below
    contexts: dict[FingerDesign, object] = {}
    try:
        for finger in design.fingers:
            if finger not in contexts:
                contexts[finger] = _sim.FingerSimContext.for_finger(finger, cfg.sim)
    except (GeometryError, MeshError):
        contexts = {}

    def grasp_one(obj: RigidObjectSpec) -> GraspOutcome:
        forces = []
        cache: dict[FingerDesign, float | None] = {}
        try:
            if not contexts:
                raise MeshError("finger context unavailable")
            for finger in design.fingers:
                if finger not in cache:
                    cache[finger] = _finger_force(finger, obj, design, cfg,
                                                  context=contexts[finger])
                forces.append(cache[finger])
        except (GeometryError, MeshError, ElementInversion, StepNotConverged):
            forces = [None, None, None]
        if any(f is None for f in forces):
            return GraspOutcome(obj.id, (0.0, 0.0, 0.0), False, float("inf"),
                                "sim_not_converged")
        forces = tuple(float(f) for f in forces)
        if sum(forces) <= 0.0:
            return GraspOutcome(obj.id, forces, False, float("inf"), "no_contact")
        held, disp = hold_test(forces, cfg.sim.friction_mu, obj.mass,
                               cfg.hold_time, cfg.drop_threshold)
        return GraspOutcome(obj.id, forces, held, disp,
                            None if held else "slipped")

    if cfg.parallel_objects > 1:
        with ThreadPoolExecutor(max_workers=cfg.parallel_objects) as pool:
            outcomes = tuple(pool.map(grasp_one, objects.objects))
    else:
        outcomes = tuple(grasp_one(o) for o in objects.objects)

    rate = sum(1 for o in outcomes if o.held) / len(outcomes)
    return EvaluationResult(design=design, outcomes=outcomes,
                            success_rate=rate, features=features_of(design),
                            wall_time=time.perf_counter() - start)


def success_matrix_rows(results, objects: ObjectSet):
    """Rows for the success-matrix CSV: design label, 0/1 per object, rate."""
    header = ["design"] + [o.id for o in objects] + ["success_rate"]
    rows = [header]
    for label, res in results:
        row = [label] + [str(int(o.held)) for o in res.outcomes] + [repr(res.success_rate)]
        rows.append(row)
    return rows


def write_success_matrix(results, objects: ObjectSet, path) -> None:
    with open(path, "w") as fh:
        for row in success_matrix_rows(results, objects):
            fh.write(",".join(row) + "\n")

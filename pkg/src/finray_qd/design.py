"""Gripper design space: parameter records, bounds, genotype encoding.

A full gripper is three fin-ray fingers plus one mount distance, 28 scalar
design variables in total. The optimizer works on a normalized genotype in
[0, 1]^28 with a fixed ordering contract:

    indices 0-8   finger 1:  H, L, W, L_tip, t_flex, t_back, N, t_rib, D_angle
    indices 9-17  finger 2   (same order)
    indices 18-26 finger 3   (same order)
    index 27      d_mount

All lengths are millimetres, angles degrees. The rib count N is the only
integer variable; it decodes by uniform binning of [0, 1] into 10 bins and
encodes to the centre of its bin.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, asdict

import numpy as np

from .errors import BoundsViolation, InvalidGenotype, OutOfUnitBox

GENOTYPE_SIZE = 28
FINGER_FIELDS = ("H", "L", "W", "L_tip", "t_flex", "t_back", "N", "t_rib", "D_angle")
FINGER_LOW = (90.0, 28.0, 20.0, 20.0, 1.0, 1.0, 1.0, 1.0, -40.0)
FINGER_HIGH = (120.0, 40.0, 35.0, 30.0, 3.0, 3.0, 10.0, 3.0, 40.0)
D_MOUNT_LOW = 30.0
D_MOUNT_HIGH = 40.0
N_INDEX = FINGER_FIELDS.index("N")
N_BINS = 10

#: Values of the reference three-finger gripper, in FINGER_FIELDS order.
#: Note L_tip, t_flex and t_back fall outside the optimization ranges; the
#: reference design is handled in evaluation-only (non-strict) mode.
BENCHMARK_FINGER = (94.5, 37.5, 21.3, 15.0, 0.0, 8.0, 2, 2.0, 2.0)
BENCHMARK_D_MOUNT = 35.0


@dataclass(frozen=True)
class FingerDesign:
    """One fin-ray finger cross-section plus its extrusion depth W."""

    H: float        # finger length (contact edge), mm
    L: float        # finger width (base), mm
    W: float        # out-of-plane thickness, mm
    L_tip: float    # solid tip length, mm
    t_flex: float   # contact-surface wall thickness, mm
    t_back: float   # non-contact-surface wall thickness, mm
    N: int          # number of crossbeam ribs
    t_rib: float    # rib thickness, mm
    D_angle: float  # rib tilt angle, degrees (0 = perpendicular to contact edge)

    def as_tuple(self) -> tuple:
        return tuple(getattr(self, f) for f in FINGER_FIELDS)


@dataclass(frozen=True)
class GripperDesign:
    """Three fingers plus the mount distance d_mount."""

    fingers: tuple[FingerDesign, FingerDesign, FingerDesign]
    d_mount: float

    def __post_init__(self):
        if len(self.fingers) != 3:
            raise ValueError("a gripper has exactly three fingers")
        object.__setattr__(self, "fingers", tuple(self.fingers))

    @property
    def identical_fingers(self) -> bool:
        return self.fingers[0] == self.fingers[1] == self.fingers[2]


class DesignBounds:
    """Per-dimension (low, high) pairs for the 28-dimensional design space."""

    def __init__(self, low=None, high=None):
        if low is None:
            low = np.array(list(FINGER_LOW) * 3 + [D_MOUNT_LOW])
        if high is None:
            high = np.array(list(FINGER_HIGH) * 3 + [D_MOUNT_HIGH])
        low = np.asarray(low, dtype=float)
        high = np.asarray(high, dtype=float)
        if low.shape != (GENOTYPE_SIZE,) or high.shape != (GENOTYPE_SIZE,):
            raise ValueError(f"bounds must have {GENOTYPE_SIZE} entries")
        if not np.all(low < high):
            raise ValueError("every lower bound must be below its upper bound")
        self.low = low
        self.high = high
        self.low.setflags(write=False)
        self.high.setflags(write=False)

    def span(self) -> np.ndarray:
        return self.high - self.low


DEFAULT_BOUNDS = DesignBounds()


def _check_genotype(g) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if g.shape != (GENOTYPE_SIZE,):
        raise InvalidGenotype(f"expected {GENOTYPE_SIZE} entries, got shape {g.shape}")
    if np.any(g < 0.0) or np.any(g > 1.0) or not np.all(np.isfinite(g)):
        bad = np.where(~((g >= 0.0) & (g <= 1.0)))[0]
        raise OutOfUnitBox(f"entries outside [0, 1] at dimensions {bad.tolist()}")
    return g


def decode(genotype, bounds: DesignBounds = DEFAULT_BOUNDS) -> GripperDesign:
    """Map a normalized genotype to physical design values.

    Continuous fields scale linearly into [low, high]; the rib count N maps
    by ``clamp(floor(g * 10) + 1, 1, 10)``.
    """
    g = _check_genotype(genotype)
    phys = bounds.low + g * bounds.span()
    fingers = []
    for f in range(3):
        vals = [float(v) for v in phys[9 * f: 9 * f + 9]]
        n_raw = g[9 * f + N_INDEX]
        vals[N_INDEX] = int(min(max(math.floor(n_raw * N_BINS) + 1, 1), N_BINS))
        fingers.append(FingerDesign(*vals))
    return GripperDesign(fingers=tuple(fingers), d_mount=float(phys[27]))


def encode(design: GripperDesign, bounds: DesignBounds = DEFAULT_BOUNDS,
           strict: bool = True) -> np.ndarray:
    """Inverse of :func:`decode`; N maps to the centre of its integer bin.

    In strict mode an out-of-range field raises :class:`BoundsViolation`
    listing the offending dimensions; otherwise entries are clamped into
    [0, 1] (evaluation-only mode).
    """
    phys = np.empty(GENOTYPE_SIZE)
    for f, finger in enumerate(design.fingers):
        phys[9 * f: 9 * f + 9] = finger.as_tuple()
    phys[27] = design.d_mount
    g = (phys - bounds.low) / bounds.span()
    for f, finger in enumerate(design.fingers):
        g[9 * f + N_INDEX] = (finger.N - 0.5) / N_BINS
    if strict:
        bad = np.where((g < 0.0) | (g > 1.0))[0]
        if bad.size:
            raise BoundsViolation(
                f"fields out of bounds at dimensions {bad.tolist()}", dimensions=bad)
    return np.clip(g, 0.0, 1.0)


@dataclass(frozen=True)
class Violation:
    """One bounds or feasibility problem found by :func:`validate`."""

    dimension: int | None   # genotype dimension index (None for feasibility rules)
    field: str
    finger: int | None      # 0-based finger index, None for d_mount / gripper-level
    value: float
    message: str
    severity: str           # "error" or "warning"


def validate(design: GripperDesign, bounds: DesignBounds = DEFAULT_BOUNDS,
             strict: bool = True) -> list[Violation]:
    """List bounds and feasibility violations; empty when the design is clean.

    Bounds violations are errors in strict mode and warnings otherwise
    (the out-of-range reference design is evaluated in non-strict mode).
    Feasibility violations (overlapping walls, tip longer than the finger)
    are always errors.
    """
    severity = "error" if strict else "warning"
    out: list[Violation] = []
    for f, finger in enumerate(design.fingers):
        vals = finger.as_tuple()
        for k, (name, v) in enumerate(zip(FINGER_FIELDS, vals)):
            dim = 9 * f + k
            lo, hi = bounds.low[dim], bounds.high[dim]
            if not lo <= v <= hi:
                out.append(Violation(dim, name, f, float(v), severity=severity,
                                     message=f"finger {f + 1} {name}={v} outside [{lo}, {hi}]"))
        if finger.t_flex + finger.t_back >= finger.L:
            out.append(Violation(None, "t_flex+t_back", f, finger.t_flex + finger.t_back,
                                 severity="error",
                                 message=f"finger {f + 1} walls overlap: t_flex + t_back >= L"))
        if finger.L_tip >= finger.H:
            out.append(Violation(None, "L_tip", f, finger.L_tip, severity="error",
                                 message=f"finger {f + 1} solid tip is as long as the finger"))
    if not bounds.low[27] <= design.d_mount <= bounds.high[27]:
        out.append(Violation(27, "d_mount", None, design.d_mount, severity=severity,
                             message=f"d_mount={design.d_mount} outside "
                                     f"[{bounds.low[27]}, {bounds.high[27]}]"))
    if design.d_mount <= 0:
        out.append(Violation(None, "d_mount", None, design.d_mount, severity="error",
                             message="d_mount must be positive"))
    return out


def benchmark_design(d_mount: float = BENCHMARK_D_MOUNT) -> GripperDesign:
    """The reference gripper: three identical fingers, configurable d_mount."""
    finger = FingerDesign(*BENCHMARK_FINGER)
    return GripperDesign(fingers=(finger, finger, finger), d_mount=d_mount)


def to_dict(design: GripperDesign) -> dict:
    return {"fingers": [asdict(f) for f in design.fingers], "d_mount": design.d_mount}


def from_dict(data: dict) -> GripperDesign:
    fingers = tuple(FingerDesign(**{k: (int(v) if k == "N" else float(v))
                                    for k, v in f.items()})
                    for f in data["fingers"])
    return GripperDesign(fingers=fingers, d_mount=float(data["d_mount"]))


def to_json(design: GripperDesign, path=None) -> str:
    """Serialize to the documented JSON record (one object per finger)."""
    text = json.dumps(to_dict(design), indent=2)
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    return text


def from_json(source) -> GripperDesign:
    """Load a design from a JSON string or file path."""
    text = str(source)
    if not text.lstrip().startswith("{"):
        with open(source) as fh:
            text = fh.read()
    return from_dict(json.loads(text))

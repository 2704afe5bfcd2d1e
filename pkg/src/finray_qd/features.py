"""Behaviour features of a gripper design: workspace and structural volume.

Both features are closed-form in the design parameters and share the exact
outline geometry with the mesher, so feature values and meshed cross-section
areas agree to floating-point precision.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .design import GripperDesign
from .outline import finger_outline

#: Thickness of the triangular mount plate used for the mount volume term.
MOUNT_PLATE_THICKNESS = 10.0  # mm


@dataclass(frozen=True)
class FeatureDescriptor:
    """The archive coordinates of a design."""

    workspace: float  # mm^2
    volume: float     # mm^3


def workspace_feature(design: GripperDesign) -> float:
    """Area of the equilateral triangle spanned by the three fingers.

    Equals (3 * sqrt(3) / 4) * d_mount^2 and grows quadratically with the
    mount distance.
    """
    d = design.d_mount
    if d <= 0:
        raise ValueError("d_mount must be positive")
    return 0.75 * math.sqrt(3.0) * d * d


def mount_volume(d_mount: float, plate_thickness: float = MOUNT_PLATE_THICKNESS) -> float:
    """Volume of the equilateral triangular mount plate."""
    return 0.25 * math.sqrt(3.0) * d_mount * d_mount * plate_thickness


def finger_volume(finger) -> float:
    """Extruded cross-section volume of one finger (walls, tip and ribs)."""
    out = finger_outline(finger)
    return out.solid_area * finger.W


def volume_feature(design: GripperDesign,
                   plate_thickness: float = MOUNT_PLATE_THICKNESS) -> float:
    """Total structural volume: mount plate plus the three fingers.

    Per finger this decomposes into the wall-and-tip cross-section area and
    the clipped rib cross-section areas, each extruded by the finger depth W.
    Raises :class:`GeometryError` for infeasible geometry.
    """
    total = mount_volume(design.d_mount, plate_thickness)
    cache: dict = {}
    for finger in design.fingers:
        if finger not in cache:
            cache[finger] = finger_volume(finger)
        total += cache[finger]
    return total


def features_of(design: GripperDesign) -> FeatureDescriptor:
    """Both archive features for one design."""
    return FeatureDescriptor(workspace=workspace_feature(design),
                             volume=volume_feature(design))

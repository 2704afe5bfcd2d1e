import math

import numpy as np
import pytest

from finray_qd.design import FingerDesign, GripperDesign, decode
from finray_qd.features import (
    MOUNT_PLATE_THICKNESS,
    features_of,
    mount_volume,
    volume_feature,
    workspace_feature,
)
from finray_qd.geom import polygon_area
from finray_qd.outline import finger_outline

SQRT3 = math.sqrt(3.0)


def gripper(d_mount=35.0, **finger_kwargs):
    base = dict(H=100.0, L=32.0, W=25.0, L_tip=22.0, t_flex=2.0, t_back=2.0,
                N=2, t_rib=2.0, D_angle=0.0)
    base.update(finger_kwargs)
    f = FingerDesign(**base)
    return GripperDesign(fingers=(f, f, f), d_mount=d_mount)


def test_workspace_exact_values():
    assert workspace_feature(gripper(30.0)) == pytest.approx(675 * SQRT3, rel=1e-12)
    assert workspace_feature(gripper(40.0)) == pytest.approx(1200 * SQRT3, rel=1e-12)


def test_workspace_quadratic_homogeneity():
    w1 = workspace_feature(gripper(17.0))
    w2 = workspace_feature(gripper(34.0))
    assert w2 == pytest.approx(4.0 * w1, rel=1e-12)


def test_workspace_range_over_design_space(rng):
    lo, hi = 675 * SQRT3, 1200 * SQRT3
    for _ in range(1000):
        d = decode(rng.random(28))
        w = workspace_feature(d)
        assert lo - 1e-9 <= w <= hi + 1e-9


def test_volume_polygon_oracle_on_lower_bound_design():
    d = decode(np.zeros(28))
    oracle = mount_volume(d.d_mount)
    for f in d.fingers:
        out = finger_outline(f)
        area = polygon_area(out.outer) - sum(polygon_area(h) for h in out.holes)
        oracle += area * f.W
    assert volume_feature(d) == pytest.approx(oracle, rel=1e-6)


def test_volume_polygon_oracle_on_random_designs(rng):
    for _ in range(100):
        d = decode(rng.random(28))
        oracle = mount_volume(d.d_mount)
        for f in d.fingers:
            out = finger_outline(f)
            area = polygon_area(out.outer) - sum(polygon_area(h) for h in out.holes)
            oracle += area * f.W
        assert volume_feature(d) == pytest.approx(oracle, rel=1e-6)


def test_mount_volume_formula():
    assert mount_volume(30.0) == pytest.approx(0.25 * SQRT3 * 900 * MOUNT_PLATE_THICKNESS)


def test_volume_monotone_in_rib_count():
    v1 = volume_feature(gripper(N=1))
    v2 = volume_feature(gripper(N=2))
    assert v2 > v1


def test_volume_linear_in_extrusion_depth():
    g1 = gripper(W=20.0)
    g2 = gripper(W=40.0)
    vm = mount_volume(35.0)
    assert volume_feature(g2) - vm == pytest.approx(2.0 * (volume_feature(g1) - vm),
                                                    rel=1e-12)


@pytest.mark.parametrize("field,span", [
    ("t_rib", (1.0, 3.0)),
    ("t_flex", (1.0, 3.0)),
    ("t_back", (1.0, 3.0)),
    ("W", (20.0, 35.0)),
])
def test_volume_strictly_increasing_in_wall_and_rib_fields(field, span, rng):
    lo, hi = span
    for _ in range(250):
        base = dict(H=90 + 30 * rng.random(), L=28 + 12 * rng.random(),
                    W=20 + 15 * rng.random(), L_tip=20 + 10 * rng.random(),
                    t_flex=1 + 2 * rng.random(), t_back=1 + 2 * rng.random(),
                    N=int(rng.integers(1, 11)), t_rib=1 + 2 * rng.random(),
                    D_angle=-40 + 80 * rng.random())
        a, b = sorted(rng.uniform(lo, hi, size=2))
        if b - a < 1e-6:
            continue
        lo_kwargs = dict(base, **{field: a})
        hi_kwargs = dict(base, **{field: b})
        v_lo = volume_feature(gripper(**lo_kwargs))
        v_hi = volume_feature(gripper(**hi_kwargs))
        assert v_hi > v_lo, (field, a, b, base)


def test_volume_strictly_increasing_in_rib_count(rng):
    for _ in range(250):
        base = dict(H=90 + 30 * rng.random(), L=28 + 12 * rng.random(),
                    W=20 + 15 * rng.random(), L_tip=20 + 10 * rng.random(),
                    t_flex=1 + 2 * rng.random(), t_back=1 + 2 * rng.random(),
                    t_rib=1 + 2 * rng.random(), D_angle=-40 + 80 * rng.random())
        n = int(rng.integers(1, 10))
        v_lo = volume_feature(gripper(N=n, **base))
        v_hi = volume_feature(gripper(N=n + 1, **base))
        assert v_hi > v_lo, (n, base)


def test_features_pure_and_positive(rng):
    for _ in range(50):
        d = decode(rng.random(28))
        f1 = features_of(d)
        f2 = features_of(d)
        assert f1.workspace == f2.workspace and f1.volume == f2.volume
        assert f1.workspace > 0 and f1.volume > 0


def test_benchmark_features_computable(benchmark):
    f = features_of(benchmark)
    assert f.workspace == pytest.approx(0.75 * SQRT3 * 35.0 ** 2)
    assert f.volume > mount_volume(35.0)

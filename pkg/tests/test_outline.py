import numpy as np
import pytest

from finray_qd.design import FingerDesign, decode
from finray_qd.errors import GeometryError
from finray_qd.geom import polygon_area
from finray_qd.outline import (
    TAG_BACK,
    TAG_CONTACT,
    TAG_MOUNT,
    TAG_RIB,
    finger_outline,
)


def make_finger(**kwargs):
    base = dict(H=100.0, L=32.0, W=25.0, L_tip=22.0, t_flex=2.0, t_back=2.0,
                N=1, t_rib=2.0, D_angle=0.0)
    base.update(kwargs)
    return FingerDesign(**base)


def test_single_rib_has_one_pocket_above_and_one_below():
    out = finger_outline(make_finger(N=1))
    assert len(out.pockets) == 2
    assert len(out.holes) == 1                      # pocket above the rib
    # the pocket below the rib opens at the base (spliced into the outer loop)
    assert np.min(out.pockets[0][:, 1]) < 1e-9
    assert np.min(out.holes[0][:, 1]) > 1e-9


def test_zero_tilt_ribs_are_perpendicular_to_contact_edge():
    out = finger_outline(make_finger(N=3, D_angle=0.0))
    for quad in out.rib_quads:
        # every rib band edge is horizontal or vertical clipping; the band
        # axis direction shows up in the two long edges of the quad
        ys = quad[:, 1]
        spread = ys.max() - ys.min()
        assert spread == pytest.approx(out.finger.t_rib, abs=1e-9)


def test_rib_count_matches_and_stations_even():
    f = make_finger(N=4)
    out = finger_outline(f)
    assert len(out.rib_quads) == 4
    stations = np.array(out.rib_stations)
    gaps = np.diff(np.concatenate([[0.0], stations, [out.y_cavity_top]]))
    assert np.allclose(gaps, gaps[0])


def test_outline_tags_cover_expected_set():
    out = finger_outline(make_finger(N=2))
    assert set(out.outer_tags) == {TAG_MOUNT, TAG_RIB, TAG_BACK, TAG_CONTACT}
    for tags in out.hole_tags:
        assert set(tags) <= {TAG_RIB, "tip"}


def test_solid_area_matches_outer_minus_holes(rng):
    # brute-force shoelace reconstruction, independent of the analytic path
    for _ in range(200):
        d = decode(rng.random(28))
        out = finger_outline(d.fingers[0])
        oracle = polygon_area(out.outer) - sum(polygon_area(h) for h in out.holes)
        assert oracle == pytest.approx(out.solid_area, rel=1e-9)


def test_rib_area_equals_span_times_thickness_when_unclipped():
    f = make_finger(N=2, D_angle=5.0)
    out = finger_outline(f)
    for span, area in zip(out.rib_spans, out.rib_areas):
        assert area == pytest.approx(span * f.t_rib, rel=1e-9)


def test_wall_merge_caps_cavity():
    # thick back wall merges with the front wall below the tip block
    f = make_finger(t_back=8.0, L=30.0)
    out = finger_outline(f)
    assert out.y_merge < out.y_tip
    assert out.y_cavity_top == pytest.approx(out.y_merge)


def test_min_wall_replaces_zero_thickness():
    f = make_finger(t_flex=0.0)
    out = finger_outline(f)
    assert out.t_flex_eff == 0.5


def test_geometry_errors():
    with pytest.raises(GeometryError):
        finger_outline(make_finger(L_tip=150.0))            # tip swallows finger
    with pytest.raises(GeometryError):
        finger_outline(make_finger(t_flex=20.0, t_back=20.0))  # walls overlap
    with pytest.raises(GeometryError):
        finger_outline(make_finger(N=30, t_rib=3.0))        # ribs overlap
    with pytest.raises(GeometryError):
        finger_outline(make_finger(N=0))


def test_benchmark_outline_shapes(benchmark):
    out = finger_outline(benchmark.fingers[0])
    assert out.t_flex_eff == 0.5            # zero wall replaced
    assert out.t_back_eff == 8.0
    assert len(out.rib_quads) == 2
    assert out.solid_area > 0
    assert out.y_cavity_top == pytest.approx(out.y_merge)   # thick back wall merges


def test_outer_loop_is_counter_clockwise(rng):
    for _ in range(50):
        d = decode(rng.random(28))
        out = finger_outline(d.fingers[0])
        assert polygon_area(out.outer) > 0
        for hole in out.holes:
            assert polygon_area(hole) > 0

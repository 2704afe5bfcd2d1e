import json

import numpy as np
import pytest

import finray_qd.grasp as grasp
from finray_qd.contact import CircleSilhouette, ConvexPolygonSilhouette
from finray_qd.design import GripperDesign, benchmark_design
from finray_qd.errors import EmptyObjectSet, UnknownShape
from finray_qd.grasp import (
    ObjectSet,
    RigidObjectSpec,
    closing_stroke,
    default_object_set,
    evaluate_design,
    hold_test,
    load_object_set,
    save_object_set,
    silhouette,
    success_matrix_rows,
    write_success_matrix,
)


def sphere(radius, mass=0.1, oid="ball"):
    return RigidObjectSpec(oid, "sphere", {"radius": radius}, mass)


def test_sphere_silhouette_is_exact_circle():
    sil = silhouette(sphere(15.0))
    assert isinstance(sil, CircleSilhouette)
    assert sil.radius == 15.0
    assert sil.center == (0.0, 0.0)


def test_cylinder_silhouette_is_rectangle():
    obj = RigidObjectSpec("can", "cylinder", {"radius": 15.0, "height": 40.0}, 0.1)
    sil = silhouette(obj)
    assert isinstance(sil, ConvexPolygonSilhouette)
    v = sil.vertices
    assert v[:, 0].max() - v[:, 0].min() == pytest.approx(30.0)
    assert v[:, 1].max() - v[:, 1].min() == pytest.approx(40.0)
    assert len(v) == 4


def test_cone_silhouette_triangle():
    obj = RigidObjectSpec("cone", "cone", {"radius": 18.0, "height": 45.0}, 0.1)
    sil = silhouette(obj)
    assert len(sil.vertices) == 3
    assert sil.r_max == pytest.approx(18.0)


def test_capsule_polygonization_chord_error():
    obj = RigidObjectSpec("cap", "capsule", {"radius": 14.0, "height": 40.0}, 0.1)
    sil = silhouette(obj, chord_error=0.5)
    v = sil.vertices
    # dense sampling of the analytic profile: every polygon vertex must lie
    # on the boundary, and the polygon must stay within 0.5 mm of the arcs
    for x, y in v:
        if y > 20.0:
            assert np.hypot(x, y - 20.0) == pytest.approx(14.0, abs=1e-9)
        elif y < -20.0:
            assert np.hypot(x, y + 20.0) == pytest.approx(14.0, abs=1e-9)
        else:
            assert abs(x) == pytest.approx(14.0, abs=1e-9)
    # midpoints of polygon edges are the farthest from the analytic arc
    worst = 0.0
    for a, b in zip(v, np.roll(v, -1, axis=0)):
        mid = 0.5 * (a + b)
        if mid[1] > 20.0:
            err = 14.0 - np.hypot(mid[0], mid[1] - 20.0)
        elif mid[1] < -20.0:
            err = 14.0 - np.hypot(mid[0], mid[1] + 20.0)
        else:
            err = 14.0 - abs(mid[0])
        worst = max(worst, abs(err))
    assert worst <= 0.5


def test_ellipsoid_polygonization_on_ellipse():
    obj = RigidObjectSpec("egg", "ellipsoid",
                          {"radius": 16.0, "half_height": 24.0}, 0.1)
    sil = silhouette(obj)
    v = sil.vertices
    assert np.allclose((v[:, 0] / 16.0) ** 2 + (v[:, 1] / 24.0) ** 2, 1.0, atol=1e-9)


def test_unknown_shape_rejected():
    with pytest.raises(UnknownShape):
        RigidObjectSpec("x", "torus", {"radius": 10.0}, 0.1)


def test_closing_stroke_examples(benchmark):
    d30 = GripperDesign(fingers=benchmark.fingers, d_mount=30.0)
    assert closing_stroke(d30, sphere(30.0)) == 0.0            # clamp at zero
    d40 = GripperDesign(fingers=benchmark.fingers, d_mount=40.0)
    assert closing_stroke(d40, sphere(15.0)) == 15.0           # capped at max
    assert closing_stroke(d40, sphere(15.0), stroke_max=30.0) == 24.0


def test_closing_stroke_non_increasing_in_radius(benchmark):
    d = GripperDesign(fingers=benchmark.fingers, d_mount=36.0)
    strokes = [closing_stroke(d, sphere(r)) for r in (10, 15, 20, 25, 30, 35)]
    assert all(b <= a for a, b in zip(strokes, strokes[1:]))


def test_hold_free_fall_displacement():
    held, disp = hold_test([0.0, 0.0, 0.0], 0.8, 0.1, hold_time=1.0)
    assert not held
    assert disp == pytest.approx(4905.0, rel=1e-9)


def test_hold_slide_case_closed_form():
    # mu=0.5, sum N=1.0 N, m=0.1 kg: capacity 0.5 < weight 0.981
    held, disp = hold_test([1.0, 0.0, 0.0], 0.5, 0.1, hold_time=0.1,
                           drop_threshold=5.0)
    assert disp == pytest.approx(24.05, rel=1e-3)
    assert not held


def test_hold_stick_case():
    held, disp = hold_test([1.0, 0.5, 0.5], 0.8, 0.1)
    assert held and disp == 0.0


def test_hold_validates_inputs():
    with pytest.raises(ValueError):
        hold_test([-1.0, 0.0, 0.0], 0.8, 0.1)
    with pytest.raises(ValueError):
        hold_test([1.0, 1.0, 1.0], 0.8, 0.0)


def test_object_set_unique_ids():
    with pytest.raises(ValueError):
        ObjectSet(objects=(sphere(10.0), sphere(12.0)))
    with pytest.raises(EmptyObjectSet):
        ObjectSet(objects=())


def test_object_set_json_round_trip(tmp_path):
    objs = default_object_set()
    path = tmp_path / "objects.json"
    save_object_set(objs, path)
    loaded = load_object_set(path)
    assert loaded.objects == objs.objects


def test_evaluate_design_counts_and_memoization(monkeypatch, benchmark, fast_eval):
    calls = []

    def fake_sim(finger, sil, stroke, cfg, **kwargs):
        calls.append((finger, stroke))
        from finray_qd.contact import ContactSummary
        return ContactSummary(total_normal_force=4.0,
                              contact_nodes=((0, 4.0, (0.0, 0.0)),),
                              converged=True)

    monkeypatch.setattr(grasp._sim, "grip_simulation", fake_sim)
    objs = ObjectSet(objects=(sphere(12.0, 0.05, "a"), sphere(15.0, 0.1, "b")))
    result = evaluate_design(benchmark, objs, fast_eval)
    # identical fingers: exactly one simulation per object, not three
    assert len(calls) == 2
    assert result.success_rate == 1.0
    assert all(o.held for o in result.outcomes)
    assert result.features.workspace > 0


def test_evaluate_design_failure_reasons(monkeypatch, benchmark, fast_eval):
    from finray_qd.contact import ContactSummary

    def no_contact(finger, sil, stroke, cfg, **kwargs):
        return ContactSummary(0.0, (), True)

    monkeypatch.setattr(grasp._sim, "grip_simulation", no_contact)
    objs = ObjectSet(objects=(sphere(12.0, 0.05, "a"),))
    result = evaluate_design(benchmark, objs, fast_eval)
    assert result.success_rate == 0.0
    assert result.outcomes[0].failure_reason == "no_contact"

    def diverged(finger, sil, stroke, cfg, **kwargs):
        return ContactSummary(3.0, ((0, 3.0, (0.0, 0.0)),), False)

    monkeypatch.setattr(grasp._sim, "grip_simulation", diverged)
    result = evaluate_design(benchmark, objs, fast_eval)
    assert result.outcomes[0].failure_reason == "sim_not_converged"


def test_evaluate_success_rate_is_fraction(monkeypatch, benchmark, fast_eval):
    from finray_qd.contact import ContactSummary

    def heavy_dependent(finger, sil, stroke, cfg, **kwargs):
        return ContactSummary(2.0, ((0, 2.0, (0.0, 0.0)),), True)

    monkeypatch.setattr(grasp._sim, "grip_simulation", heavy_dependent)
    # capacity = 0.8 * 3 * 2 = 4.8 N -> holds 0.3 kg (2.94 N), drops 0.6 kg
    objs = ObjectSet(objects=tuple(
        sphere(12.0, m, f"o{k}") for k, m in enumerate((0.1, 0.2, 0.3, 0.6, 0.9))))
    result = evaluate_design(benchmark, objs, fast_eval)
    assert result.success_rate == pytest.approx(3 / 5)
    assert result.successes == 3


def test_evaluate_order_invariance(monkeypatch, benchmark, fast_eval):
    from finray_qd.contact import ContactSummary

    def by_radius(finger, sil, stroke, cfg, **kwargs):
        return ContactSummary(stroke / 4.0, ((0, stroke / 4.0, (0, 0)),), True)

    monkeypatch.setattr(grasp._sim, "grip_simulation", by_radius)
    objs_a = ObjectSet(objects=(sphere(12.0, 0.05, "a"), sphere(20.0, 0.3, "b"),
                                sphere(28.0, 0.2, "c")))
    objs_b = ObjectSet(objects=tuple(reversed(objs_a.objects)))
    r1 = evaluate_design(benchmark, objs_a, fast_eval)
    r2 = evaluate_design(benchmark, objs_b, fast_eval)
    assert r1.success_rate == r2.success_rate
    held1 = {o.object_id: o.held for o in r1.outcomes}
    held2 = {o.object_id: o.held for o in r2.outcomes}
    assert held1 == held2


def test_overweight_probe_never_held(monkeypatch, benchmark, fast_eval):
    from finray_qd.contact import ContactSummary

    def strong(finger, sil, stroke, cfg, **kwargs):
        return ContactSummary(100.0, ((0, 100.0, (0, 0)),), True)

    monkeypatch.setattr(grasp._sim, "grip_simulation", strong)
    # capacity = 0.8 * 300 N = 240 N -> lifts at most ~24.5 kg
    probe = ObjectSet(objects=(sphere(12.0, 50.0, "anvil"),))
    result = evaluate_design(benchmark, probe, fast_eval)
    assert result.success_rate == 0.0
    assert result.outcomes[0].failure_reason == "slipped"


def test_stroke_zero_design_scores_zero_on_default_set(fast_eval):
    # a mount too small to reach any default object: every stroke clamps to 0
    tiny = GripperDesign(fingers=benchmark_design().fingers, d_mount=5.0)
    result = evaluate_design(tiny, default_object_set(), fast_eval)
    assert result.success_rate == 0.0
    assert all(o.failure_reason == "no_contact" for o in result.outcomes)


def test_empty_object_set_raises(benchmark, fast_eval):
    with pytest.raises(EmptyObjectSet):
        ObjectSet(objects=())


def test_success_matrix_format(tmp_path, monkeypatch, benchmark, fast_eval):
    from finray_qd.contact import ContactSummary

    monkeypatch.setattr(grasp._sim, "grip_simulation",
                        lambda *a, **k: ContactSummary(5.0, ((0, 5.0, (0, 0)),), True))
    objs = ObjectSet(objects=(sphere(12.0, 0.05, "a"), sphere(15.0, 5.0, "b")))
    result = evaluate_design(benchmark, objs, fast_eval)
    rows = success_matrix_rows([("benchmark", result)], objs)
    assert rows[0] == ["design", "a", "b", "success_rate"]
    assert rows[1][0] == "benchmark"
    assert rows[1][1:3] == ["1", "0"]
    assert float(rows[1][3]) == result.success_rate
    path = tmp_path / "matrix.csv"
    write_success_matrix([("benchmark", result)], objs, path)
    text = path.read_text().splitlines()
    assert len(text) == 2
    # printed rate equals the mean of the 0/1 row
    assert float(text[1].split(",")[-1]) == pytest.approx(
        np.mean([int(x) for x in text[1].split(",")[1:3]]))


def test_parallel_objects_matches_serial(monkeypatch, benchmark, fast_eval):
    from finray_qd.contact import ContactSummary

    def by_stroke(finger, sil, stroke, cfg, **kwargs):
        return ContactSummary(stroke / 3.0, ((0, stroke / 3.0, (0, 0)),), True)

    monkeypatch.setattr(grasp._sim, "grip_simulation", by_stroke)
    objs = ObjectSet(objects=tuple(
        sphere(10.0 + 4 * k, 0.05 + 0.05 * k, f"o{k}") for k in range(4)))
    serial = evaluate_design(benchmark, objs, fast_eval)
    threaded = evaluate_design(benchmark, objs,
                               fast_eval.with_overrides(parallel_objects=3))
    assert serial.success_rate == threaded.success_rate
    assert [o.object_id for o in serial.outcomes] == \
        [o.object_id for o in threaded.outcomes]
    assert [o.normal_forces for o in serial.outcomes] == \
        [o.normal_forces for o in threaded.outcomes]


def test_real_evaluation_on_tiny_set(benchmark, tiny_objects, fast_eval):
    result = evaluate_design(benchmark, tiny_objects, fast_eval)
    assert result.success_rate in (0.0, 0.5, 1.0)
    assert result.wall_time > 0
    r2 = evaluate_design(benchmark, tiny_objects, fast_eval)
    assert r2.success_rate == result.success_rate
    assert [o.normal_forces for o in r2.outcomes] == \
        [o.normal_forces for o in result.outcomes]

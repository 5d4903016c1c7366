import numpy as np
import pytest
from scipy.spatial.transform import Rotation

from uerw.exceptions import DegenerateGeometryError, MissingLandmarkError, ValidationError
from uerw.torso_frame import (
    MARKER_MAP,
    FrameLandmarks,
    LandmarkMap,
    TorsoFrameTransformer,
    build_frame,
    build_frames,
    resolve_landmark_map,
    to_local,
    wrist_end_effector,
)
from uerw.trajectory_io import KeypointTrajectory


def _random_triples(rng, n):
    t8 = rng.normal(size=(n, 3))
    t1 = t8 + rng.normal(size=(n, 3))
    st = t8 + rng.normal(size=(n, 3))
    return st, t1, t8


def test_axis_aligned_example():
    f = build_frame(FrameLandmarks(np.array([0, 0.1, 0.4]), np.array([0, 0, 0.4]), np.array([0.0, 0, 0])))
    np.testing.assert_allclose(f.v_axis, [0, 0, 1], atol=1e-15)
    np.testing.assert_allclose(f.ap_axis, [0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(f.ml_axis, [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(f.origin, [0, 0.05, 0.4], atol=1e-15)


@pytest.mark.parametrize(
    "st, t1, t8",
    [
        ([0, 0.1, 0.4], [0, 0, 0], [0, 0, 0]),  # t1 == t8
        ([0, 0, 0.2], [0, 0, 0.4], [0, 0, 0]),  # collinear
        ([1, 1, 1], [1, 1, 1], [1, 1, 1]),
    ],
)
def test_degenerate_rejected(st, t1, t8):
    with pytest.raises(DegenerateGeometryError):
        build_frame(FrameLandmarks(np.array(st, float), np.array(t1, float), np.array(t8, float)))


def test_non_finite_rejected():
    with pytest.raises(ValidationError):
        build_frame(FrameLandmarks(np.array([np.nan, 0, 0]), np.zeros(3), np.ones(3)))


def test_batch_matches_single(rng):
    st, t1, t8 = _random_triples(rng, 50)
    origins, bases = build_frames(st, t1, t8)
    for i in range(50):
        f = build_frame(FrameLandmarks(st[i], t1[i], t8[i]))
        np.testing.assert_array_equal(bases[i], f.basis)
        np.testing.assert_array_equal(origins[i], f.origin)


def test_batch_missing_frames_are_nan(rng):
    st, t1, t8 = _random_triples(rng, 4)
    t1[2] = np.nan
    origins, bases = build_frames(st, t1, t8)
    assert np.isnan(bases[2]).all() and np.isnan(origins[2]).all()
    assert np.isfinite(bases[[0, 1, 3]]).all()


def test_batch_degenerate_raises(rng):
    st, t1, t8 = _random_triples(rng, 3)
    t1[1] = t8[1]
    with pytest.raises(DegenerateGeometryError):
        build_frames(st, t1, t8)


def test_translation_invariance_and_isometry(rng):
    st, t1, t8 = _random_triples(rng, 200)
    d = rng.normal(size=3) * 5
    o1, b1 = build_frames(st, t1, t8)
    o2, b2 = build_frames(st + d, t1 + d, t8 + d)
    np.testing.assert_allclose(b2, b1, atol=1e-12)
    np.testing.assert_allclose(o2, o1 + d, atol=1e-12)
    f = build_frame(FrameLandmarks(st[0], t1[0], t8[0]))
    p, q = rng.normal(size=(2, 3))
    assert abs(np.linalg.norm(to_local(f, p) - to_local(f, q)) - np.linalg.norm(p - q)) < 1e-12


def test_to_local_examples(rng):
    st, t1, t8 = _random_triples(rng, 1)
    f = build_frame(FrameLandmarks(st[0], t1[0], t8[0]))
    np.testing.assert_allclose(to_local(f, f.origin), 0, atol=1e-15)
    np.testing.assert_allclose(to_local(f, f.origin + f.ml_axis), [1, 0, 0], atol=1e-12)
    p = rng.normal(size=(20, 3))
    oracle = (np.linalg.inv(f.basis) @ (p - f.origin).T).T
    np.testing.assert_allclose(to_local(f, p), oracle, atol=1e-12)


def test_wrist_midpoint(rng):
    np.testing.assert_array_equal(wrist_end_effector([0, 0, 0], [2, 0, 0]), [1, 0, 0])
    a = rng.normal(size=(100, 3))
    b = rng.normal(size=(100, 3))
    assert np.abs(wrist_end_effector(a, b) - 0.5 * (a + b)).max() <= 1e-15
    np.testing.assert_array_equal(wrist_end_effector(a, a), a)
    b[3] = np.nan
    assert np.isnan(wrist_end_effector(a, b)[3]).all()


def test_ml_points_to_subject_right():
    # subject faces +Y, up +Z: right-hand side is +X
    f = build_frame(FrameLandmarks(np.array([0, 0.07, 1.4]), np.array([0, -0.07, 1.42]), np.array([0, -0.1, 1.2])))
    assert f.ml_axis[0] > 0.99


def _traj(names, T=5):
    rng = np.random.default_rng(0)
    pos = rng.normal(size=(T, len(names), 3))
    return KeypointTrajectory(np.arange(T) / 60, names, pos)


def test_transformer_marker_preset_and_missing_landmark():
    traj = _traj(list(MARKER_MAP.all_names))
    w = TorsoFrameTransformer("marker").fit_transform(traj)
    assert w.shape == (5, 3)
    bad = _traj(["sternal_notch", "T1", "radial_styloid", "ulnar_styloid"])
    with pytest.raises(MissingLandmarkError, match="T8"):
        TorsoFrameTransformer("marker").fit(bad)


def test_transformer_matches_manual(rng):
    names = list(LandmarkMap().all_names)
    traj = _traj(names, T=30)
    w = TorsoFrameTransformer().fit_transform(traj)
    for i in range(30):
        f = build_frame(FrameLandmarks(*(traj.positions[i, k] for k in range(3))))
        wrist = 0.5 * (traj.positions[i, 3] + traj.positions[i, 4])
        np.testing.assert_allclose(w[i], to_local(f, wrist), atol=1e-12)


def test_resolve_landmark_map(tmp_path):
    assert resolve_landmark_map("marker") == MARKER_MAP
    m = resolve_landmark_map({"t8": "mid_back"})
    assert m.t8 == "mid_back" and m.t1 == "backneck"
    p = tmp_path / "lm.json"
    p.write_text('{"sternal_notch": "SN"}')
    assert resolve_landmark_map(str(p)).sternal_notch == "SN"
    with pytest.raises(ValidationError):
        resolve_landmark_map({"bogus": "x"})


def test_sklearn_params():
    t = TorsoFrameTransformer(landmarks="marker")
    assert t.get_params() == {"landmarks": "marker"}
    assert t.set_params(landmarks="keypoint").landmarks == "keypoint"

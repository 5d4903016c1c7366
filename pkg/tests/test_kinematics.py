import copy
import json
from importlib import resources

import numpy as np
import pytest
import torch

from uerw.exceptions import JointLimitError, SkeletonSpecError
from uerw.kinematics import (
    BodyParams,
    Pose,
    check_limits,
    forward,
    kinematic_model,
    rest_pose,
    skeleton_from_dict,
)


def _raw():
    text = resources.files("uerw").joinpath("data/torso_right_arm.json").read_text()
    return json.loads(text)


def _random_theta(spec, rng, n=None):
    lo, hi = spec.lower.copy(), spec.upper.copy()
    lo[:3], hi[:3] = -1.0, 1.0
    lo[3:6], hi[3:6] = -np.pi, np.pi
    shape = (spec.n_dof,) if n is None else (n, spec.n_dof)
    return rng.uniform(lo, hi, size=shape)


def _rot(axis, a):
    # plain textbook matrices, independent of the Rodrigues code under test
    c, s = np.cos(a), np.sin(a)
    return {
        "x": np.array([[1, 0, 0], [0, c, -s], [0, s, c]]),
        "y": np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]]),
        "z": np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]]),
    }[axis]


def test_default_skeleton_shape(skeleton):
    assert skeleton.n_dof == 16
    assert skeleton.n_keypoints == 12
    assert skeleton.dof_names[:6] == ("root_tx", "root_ty", "root_tz", "root_rz", "root_rx", "root_ry")


def test_self_parent_is_rejected():
    raw = _raw()
    raw["segments"][3]["parent"] = raw["segments"][3]["name"]
    with pytest.raises(SkeletonSpecError, match="cycle"):
        skeleton_from_dict(raw)


def test_two_segment_cycle_is_rejected():
    raw = _raw()
    raw["segments"][3]["parent"] = "hand"
    with pytest.raises(SkeletonSpecError):
        skeleton_from_dict(raw)


def test_inverted_limit_is_rejected():
    raw = _raw()
    raw["joints"][3]["limits"][0] = [1.0, 1.0]
    with pytest.raises(SkeletonSpecError, match="lo >= hi"):
        skeleton_from_dict(raw)


@pytest.mark.parametrize(
    "mutate",
    [
        lambda r: r["segments"].append(copy.deepcopy(r["segments"][1])),
        lambda r: r["segments"][2].update(parent="nowhere"),
        lambda r: r["joints"][2].update(axes=[[0, 0, 0], [0, 1, 0], [0, 0, 1]]),
        lambda r: r["joints"].pop(0),
        lambda r: r["keypoints"][0].update(segment="tail"),
    ],
)
def test_malformed_skeletons(mutate):
    raw = _raw()
    mutate(raw)
    with pytest.raises(SkeletonSpecError):
        skeleton_from_dict(raw)


def test_zero_angles_give_rest_pose(skeleton):
    kp = forward(skeleton, np.zeros(skeleton.n_dof))
    expected = []
    # walk the tree by hand with identity rotations
    seg_pos = {}
    for s in skeleton.segments:
        seg_pos[s.name] = np.zeros(3) if s.parent is None else seg_pos[s.parent] + np.array(s.offset)
    for k in skeleton.keypoints:
        expected.append(seg_pos[k.segment] + np.array(k.position))
    np.testing.assert_allclose(kp, np.array(expected), atol=1e-12)


def test_rest_pose_respects_limits(skeleton):
    th = rest_pose(skeleton)
    check_limits(skeleton, th)


def test_elbow_flexion_rotates_forearm_about_its_axis(skeleton):
    th = np.zeros(skeleton.n_dof)
    th[skeleton.dof_index("elbow_flexion")] = np.pi / 2
    kp0 = forward(skeleton, np.zeros(skeleton.n_dof))
    kp1 = forward(skeleton, th)
    names = skeleton.keypoint_names
    seg_pos = {}
    for s in skeleton.segments:
        seg_pos[s.name] = np.zeros(3) if s.parent is None else seg_pos[s.parent] + np.array(s.offset)
    pivot = seg_pos["forearm"]
    R = _rot("x", np.pi / 2)
    for name in ("wrist_radial", "wrist_ulnar", "hand_index", "hand_pinky"):
        i = names.index(name)
        np.testing.assert_allclose(kp1[i], pivot + R @ (kp0[i] - pivot), atol=1e-12)
    for name in ("clavicle", "right_acromion", "elbow_lateral", "elbow_medial", "nose"):
        i = names.index(name)
        np.testing.assert_allclose(kp1[i], kp0[i], atol=1e-12)


def test_root_rotation_order_zxy(skeleton, rng):
    th = _random_theta(skeleton, rng)
    base = th.copy()
    base[:6] = 0.0
    kp_local = forward(skeleton, base)
    R = _rot("z", th[3]) @ _rot("x", th[4]) @ _rot("y", th[5])
    np.testing.assert_allclose(forward(skeleton, th), kp_local @ R.T + th[:3], atol=1e-12)


def test_uniform_scale_two_doubles_distances_from_root(skeleton, rng):
    for _ in range(5):
        th = _random_theta(skeleton, rng)
        th[:3] = rng.normal(size=3)
        kp1 = forward(skeleton, th)
        kp2 = forward(skeleton, th, BodyParams(np.full(skeleton.n_scale_groups, 2.0), np.zeros((12, 3))))
        np.testing.assert_allclose(kp2 - th[:3], 2.0 * (kp1 - th[:3]), atol=1e-12)


def test_rigidity_within_segments(skeleton, rng):
    kp0 = forward(skeleton, np.zeros(skeleton.n_dof))
    seg_of = [k.segment for k in skeleton.keypoints]
    for th in _random_theta(skeleton, rng, 50):
        kp = forward(skeleton, th)
        for i in range(12):
            for j in range(i + 1, 12):
                if seg_of[i] == seg_of[j]:
                    d0 = np.linalg.norm(kp0[i] - kp0[j])
                    assert abs(np.linalg.norm(kp[i] - kp[j]) - d0) < 1e-12


def test_root_equivariance(skeleton, rng):
    th = _random_theta(skeleton, rng)
    th[3:6] = 0.0
    kp = forward(skeleton, th)
    yaw = 0.7
    moved = th.copy()
    moved[3] = yaw
    moved[:3] = _rot("z", yaw) @ th[:3] + np.array([0.3, -0.2, 0.1])
    expected = (kp @ _rot("z", yaw).T) + np.array([0.3, -0.2, 0.1])
    np.testing.assert_allclose(forward(skeleton, moved), expected, atol=1e-12)


def test_keypoint_offsets_add_in_segment_frame(skeleton, rng):
    th = _random_theta(skeleton, rng)
    offs = np.zeros((12, 3))
    i = skeleton.keypoint_names.index("hand_index")
    offs[i] = [0.0, 0.0, 0.01]
    a = forward(skeleton, th)
    b = forward(skeleton, th, BodyParams(np.ones(skeleton.n_scale_groups), offs))
    moved = np.linalg.norm(b - a, axis=1)
    assert moved[i] == pytest.approx(0.01, abs=1e-12)
    assert np.all(np.delete(moved, i) < 1e-15)


def test_pose_roundtrip_and_batch(skeleton, rng):
    th = _random_theta(skeleton, rng, 4)
    pose = Pose.from_vector(th[1])
    np.testing.assert_array_equal(pose.as_vector(), th[1])
    np.testing.assert_allclose(forward(skeleton, pose), forward(skeleton, th)[1], atol=1e-14)


def test_numpy_and_torch_paths_agree(skeleton, rng):
    model = kinematic_model(skeleton)
    th = _random_theta(skeleton, rng, 20)
    sc = rng.uniform(0.8, 1.2, skeleton.n_scale_groups)
    off = rng.normal(scale=0.01, size=(12, 3))
    a = model(th, sc, off)
    b = model(torch.tensor(th), torch.tensor(sc), torch.tensor(off)).numpy()
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_autograd_jacobian_matches_finite_differences(skeleton, rng):
    model = kinematic_model(skeleton)
    G, K, D = skeleton.n_scale_groups, skeleton.n_keypoints, skeleton.n_dof
    h = 1e-5
    worst = 0.0
    for _ in range(100):
        th = _random_theta(skeleton, rng)
        beta = np.concatenate([rng.uniform(0.7, 1.3, G), rng.normal(scale=0.01, size=K * 3)])

        def f_np(x):
            return model(x[:D], x[D : D + G], x[D + G :].reshape(K, 3)).ravel()

        def f_t(x):
            return model(x[:D], x[D : D + G], x[D + G :].reshape(K, 3)).reshape(-1)

        x = np.concatenate([th, beta])
        J = torch.autograd.functional.jacobian(f_t, torch.tensor(x)).numpy()
        Jfd = np.empty_like(J)
        for k in range(x.size):
            e = np.zeros_like(x)
            e[k] = h
            Jfd[:, k] = (f_np(x + e) - f_np(x - e)) / (2 * h)
        worst = max(worst, np.linalg.norm(J - Jfd) / np.linalg.norm(Jfd))
    assert worst < 1e-4


def test_strict_mode_names_the_joint(skeleton):
    th = np.zeros(skeleton.n_dof)
    th[skeleton.dof_index("elbow_flexion")] = 3.0
    forward(skeleton, th)  # lenient by default
    with pytest.raises(JointLimitError, match="elbow") as exc:
        forward(skeleton, th, strict=True)
    assert exc.value.joint == "elbow"
    assert exc.value.dof == "elbow_flexion"


def test_wrong_dof_count(skeleton):
    with pytest.raises(SkeletonSpecError):
        forward(skeleton, np.zeros(skeleton.n_dof - 1))


@pytest.mark.parametrize("scales", [np.full(6, 0.4), np.full(6, 2.5), np.ones(5)])
def test_body_params_validation(skeleton, scales):
    with pytest.raises(SkeletonSpecError):
        forward(skeleton, np.zeros(skeleton.n_dof), BodyParams(scales, np.zeros((12, 3))))

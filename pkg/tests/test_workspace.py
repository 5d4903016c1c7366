import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uerw.exceptions import ValidationError
from uerw.workspace import (
    ANALYZED_OCTANTS,
    Octant,
    WorkspaceScorer,
    classify_octant,
    generate_targets,
    octant_codes,
    peak_reach,
    percent_reached,
    simulate_capture,
)

TABLE_LABELS = [
    "Sup. Ant. Ipsil.",
    "Sup. Ant. Contra.",
    "Sup. Post. Ipsil.",
    "Inf. Ant. Ipsil.",
    "Inf. Ant. Contra.",
    "Inf. Post. Ipsil.",
]


def test_analyzed_labels_exact():
    assert [o.label for o in ANALYZED_OCTANTS] == TABLE_LABELS
    excluded = [o for o in Octant if not o.analyzed]
    assert {o.label for o in excluded} == {"Sup. Post. Contra.", "Inf. Post. Contra."}


def test_octant_round_trips():
    for o in Octant:
        assert Octant.from_label(o.label) is o
        assert Octant.from_signs(o.ml_sign, o.ap_sign, o.v_sign) is o
    with pytest.raises(ValueError):
        Octant.from_label("Sup. Left")


def test_peak_reach_examples():
    assert peak_reach([(0.1, 0, 0), (0, 0.5, 0), (0, 0, 0.3)]) == 0.5
    assert peak_reach([(0.0, 0, 0)]) == 0.0
    assert peak_reach([(np.nan,) * 3, (0, 0.2, 0)]) == 0.2
    with pytest.raises(ValidationError):
        peak_reach(np.full((3, 3), np.nan))


def test_target_sphere_properties():
    s = generate_targets(1.0, n=8)
    assert s.n_targets == 8
    assert np.abs(np.linalg.norm(s.targets, axis=1) - 1).max() <= 1e-12
    s800 = generate_targets(0.7, seed=3)
    assert s800.n_targets == 800
    assert np.abs(np.linalg.norm(s800.targets, axis=1) - 0.7).max() <= 1e-12
    for seed in range(10):
        counts = np.bincount(generate_targets(1.0, seed=seed).octants, minlength=8)
        assert counts.min() >= 80 and counts.max() <= 120
    a, b = generate_targets(0.6, seed=5), generate_targets(1.2, seed=5)
    np.testing.assert_array_equal(b.targets, 2 * a.targets)
    with pytest.raises(ValidationError):
        generate_targets(0.0)
    with pytest.raises(ValidationError):
        generate_targets(1.0, n=7)


def test_classify_examples():
    assert classify_octant((0.1, 0.1, 0.1)) is Octant.SUP_ANT_IPSIL
    assert classify_octant((-0.1, 0.1, -0.1)) is Octant.INF_ANT_CONTRA
    assert classify_octant((0.0, 0.0, 0.0)) is Octant.SUP_ANT_IPSIL
    assert classify_octant((0.0, -0.0, -1e-300)) is Octant.INF_ANT_IPSIL


def _sign_oracle(p):
    ml = "Ipsil." if p[0] >= 0 else "Contra."
    ap = "Ant." if p[1] >= 0 else "Post."
    v = "Sup." if p[2] >= 0 else "Inf."
    return f"{v} {ap} {ml}"


@settings(max_examples=200, deadline=None)
@given(st.tuples(*[st.floats(-10, 10, allow_nan=False)] * 3))
def test_classify_matches_sign_oracle(p):
    assert classify_octant(p).label == _sign_oracle(p)
    assert octant_codes(np.array([p]))[0] == classify_octant(p).value


def test_capture_examples():
    sphere = generate_targets(1.0, seed=0)
    assert not simulate_capture(np.zeros((10, 3)), sphere).any()
    k = 123
    path = np.array([sphere.targets[k] * 0.999, [0, 0, 0]])
    flags = simulate_capture(path, sphere)
    assert flags.sum() == 1 and flags[k]
    with pytest.raises(ValidationError):
        simulate_capture(path, sphere, capture_radius=0)


def _brute(w, targets, r):
    out = np.zeros(len(targets), dtype=bool)
    for i, t in enumerate(targets):
        for p in w:
            if not np.isnan(p).any() and np.sqrt(((p - t) ** 2).sum()) <= r:
                out[i] = True
                break
    return out


def test_capture_matches_scan_and_is_monotone(rng):
    sphere = generate_targets(0.5, n=200, seed=1)
    w = rng.normal(scale=0.3, size=(150, 3))
    w[::17] = np.nan
    flags = simulate_capture(w, sphere, 0.08)
    np.testing.assert_array_equal(flags, _brute(w, sphere.targets, 0.08))
    more = simulate_capture(np.vstack([w, rng.normal(scale=0.3, size=(50, 3))]), sphere, 0.08)
    assert np.all(more[flags])


def test_scale_equivariance(rng):
    w = rng.normal(scale=0.4, size=(300, 3))
    base = simulate_capture(w, generate_targets(0.5, seed=2), 0.05)
    scaled = simulate_capture(w * 4.0, generate_targets(2.0, seed=2), 0.2)
    np.testing.assert_array_equal(base, scaled)


def test_percent_reached_examples():
    sphere = generate_targets(1.0, seed=0)
    allr = percent_reached(np.ones(800, bool), sphere)
    none = percent_reached(np.zeros(800, bool), sphere)
    assert all(allr.percent(o) == 100.0 for o in ANALYZED_OCTANTS)
    assert all(none.percent(o) == 0.0 for o in ANALYZED_OCTANTS)
    excluded = int(np.isin(sphere.octants, [3, 7]).sum())
    assert sum(s.available for s in allr.scores.values()) == 800 - excluded
    with pytest.raises(ValidationError):
        percent_reached(np.ones(10, bool), sphere)


def test_percent_recomputes_from_counts(rng):
    sphere = generate_targets(1.0, seed=4)
    rep = percent_reached(rng.random(800) < 0.3, sphere)
    for s in rep.scores.values():
        assert s.percent == 100.0 * s.reached / s.available
        assert 0 <= s.reached <= s.available


def test_zero_available_is_not_applicable():
    sphere = generate_targets(1.0, n=8)
    sphere.octants[:] = 0
    rep = percent_reached(np.zeros(8, bool), sphere)
    assert rep.percent(Octant.INF_ANT_IPSIL) is None
    assert rep.rows("x")[3]["percent"] == "n/a"


def test_scorer_estimator(rng):
    w = rng.normal(scale=0.3, size=(400, 3))
    sc = WorkspaceScorer(seed=1).fit(w)
    assert sc.peak_reach_ == peak_reach(w)
    assert sc.sphere_.radius == sc.peak_reach_
    np.testing.assert_array_equal(sc.predict(w), sc.reached_)
    fixed = WorkspaceScorer(radius=0.8).fit(w)
    assert fixed.sphere_.radius == 0.8 and fixed.peak_reach_ == peak_reach(w)
    assert WorkspaceScorer().get_params()["n_targets"] == 800
    with pytest.raises(ValidationError):
        WorkspaceScorer().fit(np.zeros((3, 2)))


def test_report_rows_layout():
    rep = WorkspaceScorer().fit(np.array([[0.5, 0.5, 0.5]])).report_
    rows = rep.rows("frontal")
    assert [r["octant"] for r in rows] == TABLE_LABELS
    assert set(rows[0]) == {"octant", "system", "available", "reached", "percent"}

import io

import numpy as np
import pytest

from uerw.agreement import (
    AXES,
    OctantSequence,
    agreement_rate,
    bland_altman,
    bland_altman_reports,
    bland_altman_rows,
    compare_sequences,
    directional_error_rate,
    octant_sequence,
    write_tidy_csv,
)
from uerw.exceptions import ValidationError
from uerw.workspace import ANALYZED_OCTANTS, Octant, OctantScore, WorkspaceReport, classify_octant

SPI = Octant.SUP_POST_IPSIL
SAI = Octant.SUP_ANT_IPSIL


def _signs(o):
    return {"ML": o.ml_sign, "AP": o.ap_sign, "SI": o.v_sign}


def test_octant_sequence_matches_pointwise_classification(rng):
    w = rng.normal(size=(500, 3))
    w[::37] = np.nan
    seq = octant_sequence(w)
    for row, lab in zip(w, seq.labels):
        if np.isnan(row).any():
            assert lab is None
        else:
            assert lab == classify_octant(row)


def test_octant_sequence_flips_at_ap_crossing():
    ap = np.linspace(-1, 1, 21)
    w = np.stack([np.full(21, 0.3), ap, np.full(21, 0.2)], axis=1)
    seq = octant_sequence(w)
    assert all(l == SPI for l in seq.labels[:10])
    assert all(l == SAI for l in seq.labels[10:])


def test_constant_positive_wrist_is_sup_ant_ipsil():
    seq = octant_sequence(np.tile([0.1, 0.2, 0.3], (5, 1)))
    assert set(seq.labels) == {SAI}


def test_identity_gives_full_agreement(rng):
    seq = OctantSequence.from_labels(rng.integers(0, 8, 300).tolist())
    rep = compare_sequences(seq, seq)
    for o, s in rep.octants.items():
        if s.frames:
            assert s.agreement == 100.0
            assert all(s.directional(a) == 0.0 for a in AXES)
        else:
            assert s.agreement is None


def test_three_of_four():
    A, B = Octant.INF_ANT_CONTRA, Octant.SUP_ANT_CONTRA
    rates = agreement_rate(OctantSequence.from_labels([A] * 4), OctantSequence.from_labels([A, A, A, B]))
    assert rates[A] == 75.0
    assert rates[B] is None


def test_worked_ap_example():
    ref = OctantSequence.from_labels([SPI] * 10)
    test = OctantSequence.from_labels([SAI] + [SPI] * 9)
    d = directional_error_rate(ref, test)[SPI]
    assert d == {"ML": 0.0, "AP": 10.0, "SI": 0.0}


def test_all_axes_differ():
    ref = OctantSequence.from_labels([Octant.SUP_ANT_IPSIL] * 6)
    test = OctantSequence.from_labels([Octant.INF_POST_CONTRA] * 6)
    d = directional_error_rate(ref, test)[Octant.SUP_ANT_IPSIL]
    assert d == {"ML": 100.0, "AP": 100.0, "SI": 100.0}


def test_brute_force_tally_and_invariants(rng):
    for _ in range(20):
        n = int(rng.integers(1, 400))
        r = rng.integers(-1, 8, n)
        t = np.where(rng.random(n) < 0.7, r, rng.integers(-1, 8, n))
        ref, test = OctantSequence(np.arange(n), r), OctantSequence(np.arange(n), t)
        rep = compare_sequences(ref, test)
        for o in Octant:
            frames = agree = 0
            tally = dict.fromkeys(AXES, 0)
            for a, b in zip(r, t):
                if a < 0 or b < 0 or a != o:
                    continue
                frames += 1
                if a == b:
                    agree += 1
                    continue
                sa, sb = _signs(Octant(a)), _signs(Octant(b))
                for ax in AXES:
                    tally[ax] += sa[ax] != sb[ax]
            s = rep.octants[o]
            assert (s.frames, s.agreements) == (frames, agree)
            assert s.axis_tallies == tuple(tally[a] for a in AXES)
            assert s.agreements + s.disagreements == s.frames
            if frames:
                assert s.agreement + s.disagreement == pytest.approx(100.0, abs=1e-12)
                per_axis = [s.directional(a) for a in AXES]
                assert max(per_axis) <= s.disagreement + 1e-12
                assert sum(per_axis) >= s.disagreement - 1e-12
        assert rep.excluded_frames == int(((r < 0) | (t < 0)).sum())


def test_missing_frames_dropped_pairwise():
    ref = OctantSequence.from_labels([SAI, SAI, None, SAI])
    test = OctantSequence.from_labels([SAI, None, SPI, SPI])
    rep = compare_sequences(ref, test)
    assert rep.octants[SAI].frames == 2
    assert rep.agreement(SAI) == 50.0
    assert rep.excluded_frames == 2


def test_mismatched_sequences_raise():
    a = OctantSequence.from_labels([SAI, SAI])
    with pytest.raises(ValidationError):
        compare_sequences(a, OctantSequence.from_labels([SAI]))
    with pytest.raises(ValidationError):
        compare_sequences(a, OctantSequence.from_labels([SAI, SAI], timestamps=[0.0, 0.5]))
    with pytest.raises(ValidationError):
        OctantSequence([0.0], [9])


def test_sequence_is_immutable():
    seq = OctantSequence.from_labels(["Sup. Ant. Ipsil.", 5, None])
    assert seq.codes.tolist() == [0, 5, -1]
    with pytest.raises(ValueError):
        seq.codes[0] = 1


def test_report_rows_layout():
    seq = OctantSequence.from_labels([SAI, SAI])
    rows = compare_sequences(seq, seq).rows([SAI, SPI])
    assert [r["metric"] for r in rows[:5]] == ["frames", "agreement", "error_ML", "error_AP", "error_SI"]
    assert rows[1]["value"] == "100.000000"
    assert rows[6]["value"] == "n/a"
    text = write_tidy_csv(rows)
    assert text.startswith("octant,metric,value\n") and "\r" not in text


# -- Bland-Altman ---------------------------------------------------------------


def test_bland_altman_identity():
    r = bland_altman([(10.0, 10.0), (40.0, 40.0), (7.5, 7.5)])
    assert (r.mean, r.sd, r.lower, r.upper) == (0.0, 0.0, 0.0, 0.0)


def test_bland_altman_hand_computed():
    r = bland_altman([(8.0, 10.0), (5.0, 5.0), (12.0, 10.0)])
    assert r.mean == 0.0
    assert r.sd == 2.0
    assert r.limits == (-3.92, 3.92)


def test_bland_altman_antisymmetry(rng):
    pairs = rng.uniform(0, 100, size=(15, 2))
    a = bland_altman(pairs)
    b = bland_altman(pairs[:, ::-1])
    assert b.mean == pytest.approx(-a.mean, abs=1e-12)
    assert b.sd == pytest.approx(a.sd, rel=1e-12)
    assert b.lower == pytest.approx(-a.upper, abs=1e-12)
    assert a.lower <= a.mean <= a.upper


def test_bland_altman_needs_two_pairs():
    with pytest.raises(ValidationError):
        bland_altman([(1.0, 2.0)])
    with pytest.raises(ValidationError):
        bland_altman([(1.0, np.nan), (1.0, 2.0)])


def test_format_row():
    from uerw.agreement import BlandAltmanResult

    row = BlandAltmanResult(40, -0.70, 6.25).format_row("All Octants", "Frontal")
    assert row == "All Octants / Frontal / -0.70 / -12.95 – 11.55"
    assert BlandAltmanResult(2, -1e-9, 0.0).format_row("x", "y") == "x / y / 0.00 / 0.00 – 0.00"


def _report(pcts):
    return WorkspaceReport({o: OctantScore(o, 100, int(round(p))) for o, p in zip(ANALYZED_OCTANTS, pcts)})


def test_bland_altman_reports_pool_and_group():
    test = [_report([50, 40, 30, 20, 10, 0]), _report([52, 40, 30, 20, 10, 0])]
    ref = [_report([50, 42, 30, 20, 10, 0]), _report([50, 40, 30, 20, 10, 0])]
    res = bland_altman_reports(test, ref)
    assert set(res) == {"All Octants", *(o.label for o in ANALYZED_OCTANTS)}
    assert res["All Octants"].n == 12
    assert res[Octant.SUP_ANT_IPSIL.label].mean == 1.0
    assert res[Octant.SUP_ANT_CONTRA.label].mean == -1.0
    rows = bland_altman_rows(res, "Frontal")
    assert {r["metric"] for r in rows} == {"n", "mean_difference", "sd_difference", "loa_lower", "loa_upper"}
    buf = io.StringIO()
    write_tidy_csv(rows, buf)
    assert buf.getvalue().splitlines()[0] == "octant,system,metric,value"

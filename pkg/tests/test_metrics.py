import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from oneshot_vos.maskcore import translate
from oneshot_vos.metrics import (aggregate, attribute_report, contour_accuracy, default_tolerance,
                                 evaluate_sequence, region_similarity, summarize,
                                 temporal_instability)

from metric_cases import AGG_CASES, F_CASES, J_CASES, T_GROWTH, square
from oracles import brute_f

pair = st.integers(2, 10).flatmap(lambda n: st.tuples(arrays(bool, (n, n)), arrays(bool, (n, n))))


@pytest.mark.parametrize("label,pred,gt,want", J_CASES, ids=[c[0] for c in J_CASES])
def test_region_similarity_cases(label, pred, gt, want):
    assert abs(region_similarity(pred, gt) - want) < 1e-12


@pytest.mark.parametrize("label,pred,gt,tol,want", F_CASES, ids=[c[0] for c in F_CASES])
def test_contour_accuracy_cases(label, pred, gt, tol, want):
    assert abs(contour_accuracy(pred, gt, tol) - want) < 1e-12


@pytest.mark.parametrize("label,vals,want", AGG_CASES, ids=[c[0] for c in AGG_CASES])
def test_aggregate_cases(label, vals, want):
    assert np.allclose(aggregate(vals), want, rtol=0, atol=1e-12)


def test_default_tolerance():
    assert default_tolerance((16, 16)) == 1
    assert default_tolerance((480, 854)) == math.ceil(0.008 * math.hypot(480, 854))


def test_shape_mismatch_and_bad_tol():
    with pytest.raises(ValueError, match="dimension mismatch"):
        region_similarity(np.zeros((2, 2), bool), np.zeros((3, 2), bool))
    with pytest.raises(ValueError):
        contour_accuracy(np.ones((2, 2), bool), np.ones((2, 2), bool), -1)
    with pytest.raises(ValueError):
        aggregate([])


@given(pair)
def test_j_bounds_and_identity(p):
    a, b = p
    j = region_similarity(a, b)
    assert 0.0 <= j <= 1.0
    assert j == region_similarity(b, a)
    if b.any():
        assert (j == 1.0) == bool(np.array_equal(a, b))


@given(pair, st.integers(0, 3))
def test_f_matches_oracle_and_is_symmetric(p, tol):
    a, b = p
    f = contour_accuracy(a, b, tol)
    assert abs(f - brute_f(a, b, tol)) < 1e-12
    assert f == contour_accuracy(b, a, tol)
    assert 0.0 <= f <= 1.0


@given(pair)
def test_f_non_decreasing_in_tolerance(p):
    a, b = p
    vals = [contour_accuracy(a, b, t) for t in (0, 1, 1.5, 2, 4, 8)]
    assert all(x <= y + 1e-15 for x, y in zip(vals, vals[1:]))


def test_temporal_growth_case():
    masks, tol, want = T_GROWTH
    assert abs(temporal_instability(masks, tol) - want) < 1e-12
    assert temporal_instability(masks, tol) > 0


def test_temporal_static_and_translating():
    m = square(24, 4, 4, 5)
    assert temporal_instability([m] * 5) == 0.0
    moving = [translate(m, 2 * t, t) for t in range(6)]
    assert temporal_instability(moving) == 0.0


def test_temporal_skips_empty_pairs():
    m = square(10, 2, 2, 3)
    e = np.zeros_like(m)
    assert temporal_instability([m, e, e, m]) == 0.0
    with pytest.raises(ValueError):
        temporal_instability([m])


@given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.randoms())
def test_aggregate_permutation_and_reversal(vals, r):
    m, o, d = aggregate(vals)
    shuffled = list(vals)
    r.shuffle(shuffled)
    m2, o2, _ = aggregate(shuffled)
    assert abs(m - m2) < 1e-12 and o == o2
    assert abs(aggregate(vals[::-1])[2] + d) < 1e-12


def test_attribute_report_example():
    seqs = [evaluate_sequence("a", [square(6, 1, 1, 2)] * 2, [square(6, 1, 1, 2)] * 2),
            evaluate_sequence("b", [square(6, 1, 1, 2)] * 2, [square(6, 0, 0, 2)] * 2)]
    # replace the computed means with the worked example's 0.8 and 0.6
    seqs[0].j_mean, seqs[1].j_mean = 0.8, 0.6
    rep = attribute_report(seqs, [{"OCC"}, set()])
    assert rep.rows["OCC"]["with"] == 0.8
    assert abs(rep.rows["OCC"]["gain"] + 0.2) < 1e-12
    assert attribute_report(seqs, [{"OCC"}, {"OCC"}]).rows == {}
    assert attribute_report(seqs, [set(), set()]).rows == {}


def test_evaluate_and_summarize():
    gts = [square(12, 2 + t, 2, 4) for t in range(4)]
    rep = evaluate_sequence("s", gts, gts)
    assert (rep.j_mean, rep.j_recall, rep.j_decay, rep.f_mean, rep.t_mean) == (1.0, 1.0, 0.0, 1.0, 0.0)
    s = summarize([rep, rep])
    assert s["J"] == {"mean": 1.0, "recall": 1.0, "decay": 0.0}
    assert s["T"] == {"mean": 0.0}
    with pytest.raises(ValueError):
        evaluate_sequence("s", gts, gts[:2])
    with pytest.raises(ValueError):
        summarize([])

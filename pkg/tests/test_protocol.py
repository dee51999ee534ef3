import numpy as np
import pytest

from oneshot_vos import nnet
from oneshot_vos.protocol import (VARIANTS, AblationResult, StageWeights, TrainConfig, base_weights,
                                  finetune_oneshot, finetune_snapshots, first_frame_annotation,
                                  infer_sequence, predict_masks, progressive_refine, run_ablation,
                                  select_subset, timing_profile, train_parent, train_problems)

FAST = TrainConfig(iterations=30, seed=3)
TINY_FT = TrainConfig(iterations=8, seed=3)


@pytest.fixture(scope="module")
def tiny_parent(tiny_bench):
    return train_parent(tiny_bench.train, FAST)


def _same_weights(a, b):
    return all(np.array_equal(a.params[k], b.params[k]) for k in a.params)


def test_train_config_validation_reports_field_and_range():
    with pytest.raises(ValueError, match=r"momentum must lie in \[0, 1\), got 1.2"):
        TrainConfig(momentum=1.2)
    errs = train_problems(-1, 1.2, -5, "nope", -1)
    assert len(errs) == 5
    assert TrainConfig().replace(iterations=5).iterations == 5
    assert TrainConfig(pos_weight_mode=2.0).pos_weight_mode == 2.0


def test_select_subset_counts_and_determinism(tiny_bench):
    seqs = tiny_bench.train
    half = select_subset(seqs, 0.5, 1)
    assert [len(i) for _, i in half] == [3, 3]
    assert half == select_subset(seqs, 0.5, 1)
    assert [len(i) for _, i in select_subset(seqs, 0.25, 1)] == [2, 2]  # 1.5 rounds up
    assert [len(i) for _, i in select_subset(seqs, 1.0, 1)] == [6, 6]
    with pytest.raises(ValueError, match="selects no frames"):
        select_subset(seqs, 0.05, 1)
    with pytest.raises(ValueError):
        select_subset(seqs, 0.0, 1)


def test_parent_training_is_deterministic_and_learns(tiny_bench):
    a = train_parent(tiny_bench.train, FAST)
    b = train_parent(tiny_bench.train, FAST)
    assert _same_weights(a.model, b.model)
    assert len(a.log) == FAST.iterations
    assert np.mean(a.log[-5:]) < np.mean(a.log[:5])
    c = train_parent(tiny_bench.train, FAST.replace(seed=4))
    assert not _same_weights(a.model, c.model)


def test_parent_does_not_mutate_base(tiny_bench):
    base = base_weights(3)
    before = base.model.copy()
    train_parent(tiny_bench.train, FAST, base=base)
    assert _same_weights(base.model, before)


def test_zero_iteration_finetune_is_the_parent(tiny_bench, tiny_parent):
    seq = tiny_bench.val[0]
    w = finetune_oneshot(tiny_parent, seq, first_frame_annotation(seq), TINY_FT.replace(iterations=0))
    assert _same_weights(w.model, tiny_parent.model)
    assert w.annotated == (0,)


def test_snapshots_equal_separate_runs(tiny_bench, tiny_parent):
    seq = tiny_bench.val[1]
    ann = {0: seq.gt[0], 3: seq.gt[3]}
    snaps = finetune_snapshots(tiny_parent, seq, ann, TINY_FT, (0, 3, 8))
    for k in (3, 8):
        solo = finetune_oneshot(tiny_parent, seq, ann, TINY_FT.replace(iterations=k))
        assert _same_weights(snaps[k][0].model, solo.model)
    assert snaps[0][1] == 0.0


def test_finetune_argument_errors(tiny_bench, tiny_parent):
    seq = tiny_bench.val[0]
    with pytest.raises(ValueError):
        finetune_oneshot(tiny_parent, seq, {}, TINY_FT)
    with pytest.raises(IndexError):
        finetune_oneshot(tiny_parent, seq, {99: seq.gt[0]}, TINY_FT)


def test_inference_is_order_independent(tiny_bench, tiny_parent):
    seq = tiny_bench.val[0]
    a = infer_sequence(tiny_parent, seq)
    b = infer_sequence(tiny_parent, seq, order=reversed(range(len(seq))))
    for (f1, c1), (f2, c2) in zip(a, b):
        assert np.array_equal(f1, f2) and np.array_equal(c1, c2)


def test_zero_model_gives_constant_maps(tiny_bench):
    seq = tiny_bench.val[0]
    maps = infer_sequence(StageWeights("base", nnet.zeros_model()), seq)
    assert all(np.all(f == 0.5) and np.all(c == 0.5) for f, c in maps)
    assert all(m.all() for m in predict_masks(maps))


def test_ablation_structure_and_worker_independence(tiny_bench, tiny_parent):
    base = base_weights(3)
    one = run_ablation(tiny_parent, base, tiny_bench.val, TINY_FT, workers=1)
    two = run_ablation(tiny_parent, base, tiny_bench.val, TINY_FT, workers=2)
    assert one.variants == VARIANTS
    for v in VARIANTS:
        assert one.mean_j(v) == two.mean_j(v)
        for name in one.masks[v]:
            assert all(np.array_equal(a, b) for a, b in zip(one.masks[v][name], two.masks[v][name]))
    d = one.deltas()
    assert set(d) == set(VARIANTS) - {"Ours"}
    assert abs(d["-BS"]["J"] - (one.mean_j("Ours") - one.mean_j("-BS"))) < 1e-12
    assert set(one.maps) == {s.name for s in tiny_bench.val}
    with pytest.raises(ValueError):
        run_ablation(tiny_parent, base, tiny_bench.val, TINY_FT, variants=("bogus",))


def test_ablation_single_variant(tiny_bench, tiny_parent):
    res = run_ablation(tiny_parent, base_weights(3), tiny_bench.val[:1], TINY_FT, variants=("-OS-BS",))
    assert res.variants == ("-OS-BS",)
    with pytest.raises(KeyError):
        res.deltas()
    assert isinstance(res, AblationResult)


def test_refinement_trace_rules(tiny_bench, tiny_parent):
    seq = tiny_bench.val[1]
    tr = progressive_refine(tiny_parent, seq, 3, TINY_FT, include_all=True)
    assert tr.counts() == [0, 1, 2, 3, len(seq)]
    frames = [f for _, f, _ in tr.steps]
    assert frames[0] == () and frames[1] == (0,)
    assert len(set(frames[3])) == 3 and frames[3][:2] == frames[2]
    assert frames[-1] == tuple(range(len(seq)))
    assert all(0.0 <= j <= 1.0 for j in tr.j_values())
    with pytest.raises(ValueError):
        progressive_refine(tiny_parent, seq, len(seq) + 1, TINY_FT)


def test_timing_profile_shape(tiny_bench, tiny_parent):
    ticks = iter(range(10_000))
    pts = timing_profile(tiny_parent, tiny_bench.val[:1], [0, 4, 8], TINY_FT, clock=lambda: next(ticks))
    modes = [(p.mode, p.iterations) for p in pts]
    assert modes[0] == ("-OS-BS", 0)
    assert ("Pre Ours", 8) in modes and len(pts) == 1 + 4 * 3
    by = {(p.mode, p.iterations): p for p in pts}
    assert by[("-BS", 0)].j_mean == by[("-OS-BS", 0)].j_mean
    n = len(tiny_bench.val[0])
    assert by[("-BS", 8)].steps_per_frame == 8 / n
    assert by[("Pre -BS", 8)].steps_per_frame == 0.0
    assert by[("-BS", 8)].seconds_per_frame > by[("Pre -BS", 8)].seconds_per_frame
    with pytest.raises(ValueError):
        timing_profile(tiny_parent, tiny_bench.val[:1], [], TINY_FT)

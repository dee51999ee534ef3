"""Parent training, one-shot fine-tuning and the experiment variants built on them.

Model variants are named by the components they drop:

=============  ==================================================
``Ours``       parent, one-shot fine-tune, boundary snapping
``-BS``        parent, one-shot fine-tune
``-PN-BS``     one-shot fine-tune from the base initialisation
``-OS-BS``     parent only
``-PN-OS-BS``  base initialisation only
=============  ==================================================
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import nnet
from .maskcore import VideoSequence, as_mask, threshold
from .metrics import SequenceReport, evaluate_sequence, region_similarity
from .rng import SplitMix64, derive_seed
from .snap import SnapConfig, snap

VARIANTS = ("Ours", "-BS", "-PN-BS", "-OS-BS", "-PN-OS-BS")
DROPPED = {
    "Ours": frozenset(),
    "-BS": frozenset({"BS"}),
    "-PN-BS": frozenset({"PN", "BS"}),
    "-OS-BS": frozenset({"OS", "BS"}),
    "-PN-OS-BS": frozenset({"PN", "OS", "BS"}),
}

_SUBSET_STREAM = 1
_ORDER_STREAM = 2


def train_problems(learning_rate, momentum, iterations, pos_weight_mode="balanced",
                   contour_weight=1.0) -> list[str]:
    """Every violated hyperparameter constraint, as messages naming the field."""
    out = []
    if not learning_rate > 0:
        out.append(f"learning_rate must be > 0, got {learning_rate}")
    if not 0.0 <= momentum < 1.0:
        out.append(f"momentum must lie in [0, 1), got {momentum}")
    if iterations < 0:
        out.append(f"iterations must be >= 0, got {iterations}")
    if pos_weight_mode != "balanced":
        try:
            ok = float(pos_weight_mode) > 0
        except (TypeError, ValueError):
            ok = False
        if not ok:
            out.append(f"pos_weight_mode must be 'balanced' or a positive number, got {pos_weight_mode!r}")
    if contour_weight < 0:
        out.append(f"contour_weight must be >= 0, got {contour_weight}")
    return out


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-2
    momentum: float = 0.9
    iterations: int = 2000
    seed: int = 0
    pos_weight_mode: str | float = "balanced"
    contour_weight: float = 1.0

    def __post_init__(self):
        for msg in self.problems():
            raise ValueError(msg)

    def problems(self) -> list[str]:
        return train_problems(self.learning_rate, self.momentum, self.iterations,
                              self.pos_weight_mode, self.contour_weight)

    def replace(self, **kw) -> "TrainConfig":
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d.update(kw)
        return TrainConfig(**d)


PARENT_CONFIG = TrainConfig(iterations=2000)
ONESHOT_CONFIG = TrainConfig(iterations=200)


@dataclass
class StageWeights:
    tag: str  # base | parent | oneshot
    model: nnet.FcnModel
    sequence: str | None = None
    annotated: tuple[int, ...] = ()
    log: list[float] = field(default_factory=list)


def base_weights(seed: int, in_channels: int = 3, widths=nnet.DEFAULT_WIDTHS) -> StageWeights:
    return StageWeights("base", nnet.init_model(seed, in_channels, widths))


def _sgd(model: nnet.FcnModel, x, fg, ct, picks, cfg: TrainConfig, snapshots=(),
         clock=time.perf_counter):
    """Run ``len(picks)`` single-frame steps; ``picks[i]`` indexes the data.

    Returns ``(losses, {step: (model copy, seconds elapsed)})`` for each step
    count in ``snapshots``. Copying is excluded from the elapsed time.
    """
    pw = cfg.pos_weight_mode if cfg.pos_weight_mode == "balanced" else float(cfg.pos_weight_mode)
    vel: dict = {}
    losses = []
    saved = {}
    elapsed = 0.0
    if 0 in snapshots:
        saved[0] = (model.copy(), 0.0)
    for step, i in enumerate(picks, start=1):
        t0 = clock()
        loss, grads = nnet.loss_and_grads(model, x[i:i + 1], fg[i:i + 1], ct[i:i + 1],
                                          cfg.contour_weight, pw)
        model.params, vel = nnet.sgd_step(model.params, grads, vel, cfg.learning_rate, cfg.momentum)
        elapsed += clock() - t0
        losses.append(loss)
        if step in snapshots:
            saved[step] = (model.copy(), elapsed)
    return losses, saved


def _training_arrays(model, frames, masks):
    x = nnet._as_batch(model, np.stack(frames))
    fg = np.stack([as_mask(m) for m in masks]).astype(np.float64)
    ct = np.stack([nnet.contour_target(m) for m in masks]).astype(np.float64)
    return x, fg, ct


def select_subset(seqs, fraction: float, seed: int) -> list[tuple[int, list[int]]]:
    """Per sequence, ``round(fraction * n)`` frames chosen by a seeded shuffle."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"subset fraction must lie in (0, 1], got {fraction}")
    out = []
    for k, seq in enumerate(seqs):
        n = len(seq)
        take = int(math.floor(fraction * n + 0.5))
        perm = SplitMix64(derive_seed(seed, _SUBSET_STREAM, k)).permutation(n)
        out.append((k, sorted(int(i) for i in perm[:take])))
    if not any(idx for _, idx in out):
        raise ValueError(f"subset fraction {fraction} selects no frames")
    return out


def train_parent(train, cfg: TrainConfig = PARENT_CONFIG, subset_fraction: float = 1.0,
                 base: StageWeights | None = None) -> StageWeights:
    train = list(train)
    if not train:
        raise ValueError("empty training split")
    if base is None:
        base = base_weights(cfg.seed, 3 if np.ndim(train[0].frames[0]) == 3 else 1)
    frames, masks = [], []
    for k, idx in select_subset(train, subset_fraction, cfg.seed):
        frames += [train[k].frames[i] for i in idx]
        masks += [train[k].gt[i] for i in idx]
    model = base.model.copy()
    x, fg, ct = _training_arrays(model, frames, masks)
    rng = SplitMix64(derive_seed(cfg.seed, _ORDER_STREAM))
    picks = [rng.integers(0, len(frames)) for _ in range(cfg.iterations)]
    log, _ = _sgd(model, x, fg, ct, picks, cfg)
    return StageWeights("parent", model, log=log)


def _annotation_arrays(model, seq: VideoSequence, annotations):
    ann = sorted((int(t), as_mask(m)) for t, m in dict(annotations).items())
    if not ann:
        raise ValueError("fine-tuning needs at least one annotated frame")
    for t, m in ann:
        if not 0 <= t < len(seq):
            raise IndexError(f"annotated frame {t} outside 0..{len(seq) - 1}")
        if m.shape != seq.shape:
            raise ValueError("annotation size differs from frame size")
    idx = [t for t, _ in ann]
    return idx, _training_arrays(model, [seq.frames[t] for t in idx], [m for _, m in ann])


def finetune_oneshot(parent: StageWeights, seq: VideoSequence, annotations,
                     cfg: TrainConfig = ONESHOT_CONFIG) -> StageWeights:
    """Continue SGD from ``parent`` on the annotated frames, visited cyclically.

    ``annotations`` maps frame index to mask.
    """
    return finetune_snapshots(parent, seq, annotations, cfg, (cfg.iterations,))[cfg.iterations][0]


def finetune_snapshots(parent: StageWeights, seq: VideoSequence, annotations, cfg: TrainConfig,
                       steps, clock=time.perf_counter) -> dict[int, tuple[StageWeights, float]]:
    """One fine-tuning run of ``max(steps)`` iterations, saved at every count in ``steps``.

    Each snapshot equals the weights of a run stopped at that count. Values
    are ``(weights, training seconds)``.
    """
    steps = sorted(set(int(k) for k in steps))
    if not steps or steps[0] < 0:
        raise ValueError("snapshot steps must be non-negative")
    model = parent.model.copy()
    idx, (x, fg, ct) = _annotation_arrays(model, seq, annotations)
    picks = [i % len(idx) for i in range(steps[-1])]
    log, saved = _sgd(model, x, fg, ct, picks, cfg, snapshots=set(steps), clock=clock)
    return {k: (StageWeights("oneshot", m, seq.name, tuple(idx), log[:k]), sec)
            for k, (m, sec) in saved.items()}


def infer_sequence(weights: StageWeights | nnet.FcnModel, seq: VideoSequence, order=None):
    """Per-frame ``(fg, contour)`` maps in frame order; ``order`` only permutes work."""
    model = weights.model if isinstance(weights, StageWeights) else weights
    order = range(len(seq)) if order is None else order
    out = [None] * len(seq)
    for t in order:
        out[t] = nnet.forward(model, seq.frames[t])
    return out


def predict_masks(maps, snap_cfg: SnapConfig | None = None) -> list[np.ndarray]:
    if snap_cfg is None:
        return [threshold(fg) for fg, _ in maps]
    return [snap(fg, ct, snap_cfg) for fg, ct in maps]


def first_frame_annotation(seq: VideoSequence) -> dict[int, np.ndarray]:
    return {0: seq.gt[0]}


def parallel_map(fn, items, workers: int = 1) -> list:
    """Ordered map; results do not depend on ``workers``."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(i) for i in items]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


# ---------------------------------------------------------------- ablation

@dataclass
class AblationResult:
    variants: tuple[str, ...]
    reports: dict[str, list[SequenceReport]]
    masks: dict[str, dict[str, list[np.ndarray]]]
    # (fg, contour) maps of the parent + one-shot model, when any variant used it
    maps: dict[str, list] = field(default_factory=dict)

    def mean_j(self, variant: str) -> float:
        return float(np.mean([r.j_mean for r in self.reports[variant]]))

    def deltas(self) -> dict[str, dict[str, float]]:
        """Ours minus each variant; positive values are what the variant loses."""
        if "Ours" not in self.reports:
            raise KeyError("delta table needs the Ours variant")

        def means(v):
            rs = self.reports[v]
            return {"J": np.mean([r.j_mean for r in rs]), "F": np.mean([r.f_mean for r in rs]),
                    "T": np.mean([r.t_mean for r in rs])}

        ours = means("Ours")
        return {v: {k: float(ours[k] - val) for k, val in means(v).items()}
                for v in self.variants if v != "Ours"}


@dataclass
class _AblationJob:
    parent: StageWeights
    base: StageWeights
    seq: VideoSequence
    cfg: TrainConfig
    snap_cfg: SnapConfig
    variants: tuple[str, ...]

    def __call__(self) -> dict[str, list[np.ndarray]]:
        return _ablate_sequence(self)


def _ablate_sequence(job: _AblationJob):
    ann = first_frame_annotation(job.seq)
    cache: dict = {}

    def maps_for(start: str, oneshot: bool):
        key = (start, oneshot)
        if key not in cache:
            w = job.parent if start == "parent" else job.base
            if oneshot:
                w = finetune_oneshot(w, job.seq, ann, job.cfg)
            cache[key] = infer_sequence(w, job.seq)
        return cache[key]

    out = {}
    for v in job.variants:
        dropped = DROPPED[v]
        maps = maps_for("base" if "PN" in dropped else "parent", "OS" not in dropped)
        out[v] = predict_masks(maps, None if "BS" in dropped else job.snap_cfg)
    return out, cache.get(("parent", True))


def _call(job):
    return job()


def run_ablation(parent: StageWeights, base: StageWeights, seqs, cfg: TrainConfig = ONESHOT_CONFIG,
                 snap_cfg: SnapConfig = SnapConfig(), variants=VARIANTS, workers: int = 1) -> AblationResult:
    variants = tuple(variants)
    unknown = [v for v in variants if v not in DROPPED]
    if unknown:
        raise ValueError(f"unknown variants {unknown}; choose from {VARIANTS}")
    seqs = list(seqs)
    jobs = [_AblationJob(parent, base, s, cfg, snap_cfg, variants) for s in seqs]
    per_seq = parallel_map(_call, jobs, workers)
    masks = {v: {s.name: r[v] for s, (r, _) in zip(seqs, per_seq)} for v in variants}
    maps = {s.name: m for s, (_, m) in zip(seqs, per_seq) if m is not None}
    reports = {v: [evaluate_sequence(s.name, masks[v][s.name], s.gt) for s in seqs] for v in variants}
    return AblationResult(variants, reports, masks, maps)


# ---------------------------------------------------------------- refinement

@dataclass
class RefinementTrace:
    sequence: str
    steps: list[tuple[int, tuple[int, ...], float]] = field(default_factory=list)

    def counts(self) -> list[int]:
        return [n for n, _, _ in self.steps]

    def j_values(self) -> list[float]:
        return [j for _, _, j in self.steps]


def progressive_refine(parent: StageWeights, seq: VideoSequence, max_n: int,
                       cfg: TrainConfig = ONESHOT_CONFIG, snap_cfg: SnapConfig | None = None,
                       include_all: bool = False) -> RefinementTrace:
    """Annotate the worst frame each round and re-fine-tune from the parent.

    Round 0 scores the parent directly and round 1 is the usual first-frame
    fine-tune. Every later round adds the lowest-J unannotated frame (lowest
    index on ties). A round with N annotations runs ``N * cfg.iterations``
    steps so each annotated frame gets the same number of visits. Scores
    cover every frame, annotated ones included. ``include_all`` appends a
    run annotated on every frame.
    """
    if seq.gt is None:
        raise ValueError("refinement needs ground truth")
    if not 0 <= max_n <= len(seq):
        raise ValueError(f"max_n must lie in 0..{len(seq)}")

    def score(weights):
        masks = predict_masks(infer_sequence(weights, seq), snap_cfg)
        return [region_similarity(m, g) for m, g in zip(masks, seq.gt)]

    trace = RefinementTrace(seq.name)
    annotated: list[int] = []
    js = score(parent)
    trace.steps.append((0, (), float(np.mean(js))))
    for n in range(1, max_n + 1):
        free = [t for t in range(len(seq)) if t not in annotated]
        annotated.append(0 if n == 1 else min(free, key=lambda t: (js[t], t)))
        w = finetune_oneshot(parent, seq, {t: seq.gt[t] for t in annotated},
                             cfg.replace(iterations=cfg.iterations * n))
        js = score(w)
        trace.steps.append((n, tuple(annotated), float(np.mean(js))))
    if include_all and max_n < len(seq):
        w = finetune_oneshot(parent, seq, dict(enumerate(seq.gt)),
                             cfg.replace(iterations=cfg.iterations * len(seq)))
        trace.steps.append((len(seq), tuple(range(len(seq))), float(np.mean(score(w)))))
    return trace


# ---------------------------------------------------------------- timing

@dataclass(frozen=True)
class TimingPoint:
    mode: str
    iterations: int
    seconds_per_frame: float  # wall clock
    steps_per_frame: float  # fine-tuning SGD steps charged to each frame
    j_mean: float


def timing_profile(parent: StageWeights, seqs, grid, cfg: TrainConfig = ONESHOT_CONFIG,
                   snap_cfg: SnapConfig = SnapConfig(), clock=time.perf_counter) -> list[TimingPoint]:
    """J against per-frame cost for each fine-tuning budget in ``grid``.

    Amortised modes charge fine-tuning time over the frames of the sequence;
    ``Pre`` modes assume fine-tuning happened offline. Timings and J are
    averaged over ``seqs``.
    """
    grid = sorted(set(int(g) for g in grid))
    if not grid:
        raise ValueError("empty iteration grid")
    if grid[0] < 0:
        raise ValueError("iteration counts must be >= 0")
    seqs = list(seqs)
    acc: dict[tuple[str, int], list[tuple[float, float, float]]] = {}

    def add(mode, it, sec, steps, j):
        acc.setdefault((mode, it), []).append((sec, steps, j))

    for seq in seqs:
        n = len(seq)
        t0 = clock()
        base_maps = infer_sequence(parent, seq)
        fwd = (clock() - t0) / n
        js = [region_similarity(m, g) for m, g in zip(predict_masks(base_maps), seq.gt)]
        add("-OS-BS", 0, fwd, 0.0, float(np.mean(js)))

        snaps = finetune_snapshots(parent, seq, first_frame_annotation(seq), cfg, grid, clock)
        for it in grid:
            t0 = clock()
            weights, ft = snaps[it]
            maps = infer_sequence(weights, seq)
            fwd = (clock() - t0) / n
            t0 = clock()
            snapped = predict_masks(maps, snap_cfg)
            snap_t = (clock() - t0) / n
            plain = predict_masks(maps)
            j_bs = float(np.mean([region_similarity(m, g) for m, g in zip(plain, seq.gt)]))
            j_ours = float(np.mean([region_similarity(m, g) for m, g in zip(snapped, seq.gt)]))
            ft /= n
            add("-BS", it, ft + fwd, it / n, j_bs)
            add("Ours", it, ft + fwd + snap_t, it / n, j_ours)
            add("Pre -BS", it, fwd, 0.0, j_bs)
            add("Pre Ours", it, fwd + snap_t, 0.0, j_ours)

    order = ["-OS-BS", "-BS", "Ours", "Pre -BS", "Pre Ours"]
    points = []
    for (mode, it), vals in sorted(acc.items(), key=lambda kv: (order.index(kv[0][0]), kv[0][1])):
        a = np.asarray(vals)
        points.append(TimingPoint(mode, it, float(a[:, 0].mean()), float(a[:, 1].mean()), float(a[:, 2].mean())))
    return points

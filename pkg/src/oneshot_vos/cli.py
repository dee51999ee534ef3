"""Command-line entry point.

Exit codes: 0 success, 1 unexpected failure, 2 usage error, 3 invalid
configuration, 4 missing input files.

Configuration files are INI-style ``key = value`` lists grouped in sections;
every key is optional and documented in :data:`DEFAULTS`.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import os
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, nnet
from .analysis import (ReportInputs, assemble_report, oracle_bounds, tracker_eval)
from .maskcore import (MaskFormatError, load_mask_dir, load_probmap, load_sequence, save_mask,
                       save_probmap)
from .metrics import evaluate_sequence, summarize
from .protocol import (VARIANTS, AblationResult, RefinementTrace, StageWeights, TimingPoint,
                       TrainConfig, base_weights, finetune_oneshot, infer_sequence,
                       progressive_refine, run_ablation, timing_profile, train_parent,
                       train_problems)
from .snap import SnapConfig, snap
from .synthvid import make_benchmark, read_benchmark, write_benchmark

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CONFIG, EXIT_MISSING = 0, 1, 2, 3, 4
# the dataset directory already owns manifest.json
RUN_MANIFEST = "run_manifest.json"

# section -> key -> (default, description)
DEFAULTS: dict[str, dict[str, tuple[object, str]]] = {
    "data": {
        "root": ("", "dataset directory (as written by `generate`)"),
        "master_seed": (7, "seed of the synthetic benchmark"),
        "n_train": (16, "training sequences"),
        "n_val": (8, "validation sequences"),
        "frame_size": (64, "square frame side in pixels, divisible by 4"),
        "num_frames": (20, "frames per sequence"),
    },
    "parent": {
        "learning_rate": (1e-2, "SGD step size"),
        "momentum": (0.9, "SGD momentum in [0, 1)"),
        "iterations": (2000, "parent training steps"),
        "seed": (0, "seed for the base initialisation and frame sampling"),
        "pos_weight_mode": ("balanced", "'balanced' or a positive foreground weight"),
        "subset_fraction": (1.0, "fraction of frames per training sequence, in (0, 1]"),
    },
    "oneshot": {
        "learning_rate": (1e-2, "SGD step size"),
        "momentum": (0.9, "SGD momentum in [0, 1)"),
        "iterations": (200, "fine-tuning steps"),
        "pos_weight_mode": ("balanced", "'balanced' or a positive foreground weight"),
    },
    "snap": {
        "contour_threshold": (0.5, "contour strength separating seeds from contours, in (0, 1)"),
        "majority": (0.5, "mean foreground probability that keeps a region, in (0, 1]"),
    },
    "eval": {
        "tolerance": ("auto", "boundary match tolerance in pixels, or 'auto'"),
    },
    "experiments": {
        "budget_fractions": ("0.5,1.0", "training-data fractions for the budget sweep"),
        "refine_max_n": (5, "annotation rounds in progressive refinement"),
        "refine_sequences": (4, "validation sequences used for refinement"),
        "timing_grid": ("0,25,50,100,200", "fine-tuning iteration counts for the timing profile"),
        "timing_sequences": (4, "validation sequences used for timing"),
    },
}


class ConfigError(Exception):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    root: str = ""
    master_seed: int = 7
    n_train: int = 16
    n_val: int = 8
    frame_size: int = 64
    num_frames: int = 20
    parent: TrainConfig = field(default_factory=lambda: TrainConfig(iterations=2000))
    subset_fraction: float = 1.0
    oneshot: TrainConfig = field(default_factory=lambda: TrainConfig(iterations=200))
    snap: SnapConfig = field(default_factory=SnapConfig)
    tolerance: int | None = None
    budget_fractions: tuple[float, ...] = (0.5, 1.0)
    refine_max_n: int = 5
    refine_sequences: int = 4
    timing_grid: tuple[int, ...] = (0, 25, 50, 100, 200)
    timing_sequences: int = 4

    def snapshot(self) -> dict:
        d = asdict(self)
        d.pop("root")
        return d


def _parse_value(kind, raw: str):
    raw = raw.strip()
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    return raw


def _pos_weight(raw):
    return raw if str(raw) == "balanced" else float(raw)


def _floats(raw) -> tuple[float, ...]:
    return tuple(float(v) for v in str(raw).split(",") if v.strip())


def _ints(raw) -> tuple[int, ...]:
    return tuple(int(v) for v in str(raw).split(",") if v.strip())


def parse_config_text(text: str, require_root: bool = True) -> RunConfig:
    """Build a :class:`RunConfig`, collecting every problem before failing."""
    cp = configparser.ConfigParser(interpolation=None)
    errors: list[str] = []
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"parse error: {exc}"]) from exc
    vals: dict[str, dict[str, object]] = {s: {k: d for k, (d, _) in keys.items()} for s, keys in DEFAULTS.items()}
    for section in cp.sections():
        if section not in DEFAULTS:
            errors.append(f"unknown section [{section}]")
            continue
        for key, raw in cp[section].items():
            if key not in DEFAULTS[section]:
                errors.append(f"unknown key {section}.{key}")
                continue
            default = DEFAULTS[section][key][0]
            try:
                vals[section][key] = _parse_value(type(default), raw)
            except ValueError:
                errors.append(f"{section}.{key}: expected {type(default).__name__}, got {raw!r}")

    def check(cond, msg):
        if not cond:
            errors.append(msg)

    d, p, o, s, e, x = (vals[k] for k in ("data", "parent", "oneshot", "snap", "eval", "experiments"))
    check(d["n_train"] >= 1, f"data.n_train must be >= 1, got {d['n_train']}")
    check(d["n_val"] >= 1, f"data.n_val must be >= 1, got {d['n_val']}")
    check(d["frame_size"] >= 4 and d["frame_size"] % 4 == 0,
          f"data.frame_size must be a positive multiple of 4, got {d['frame_size']}")
    check(d["num_frames"] >= 2, f"data.num_frames must be >= 2, got {d['num_frames']}")
    root = str(d["root"])
    if require_root:
        if not root:
            errors.append("data.root: dataset path is required")
        elif not (Path(root) / "manifest.json").is_file():
            errors.append(f"data.root: no dataset manifest at {root}")

    stage = {}
    for name, sec in (("parent", p), ("oneshot", o)):
        kw = dict(learning_rate=sec["learning_rate"], momentum=sec["momentum"],
                  iterations=sec["iterations"], seed=int(p["seed"]))
        try:
            kw["pos_weight_mode"] = _pos_weight(sec["pos_weight_mode"])
        except ValueError:
            errors.append(f"{name}.pos_weight_mode must be 'balanced' or a positive number")
            kw["pos_weight_mode"] = "balanced"
        errors += [f"{name}.{m}" for m in train_problems(
            kw["learning_rate"], kw["momentum"], kw["iterations"], kw["pos_weight_mode"])]
        stage[name] = kw
    check(0.0 < p["subset_fraction"] <= 1.0,
          f"parent.subset_fraction must lie in (0, 1], got {p['subset_fraction']}")
    check(0.0 < s["contour_threshold"] < 1.0,
          f"snap.contour_threshold must lie in (0, 1), got {s['contour_threshold']}")
    check(0.0 < s["majority"] <= 1.0, f"snap.majority must lie in (0, 1], got {s['majority']}")
    tol = None
    if str(e["tolerance"]) != "auto":
        try:
            tol = int(e["tolerance"])
            check(tol >= 0, f"eval.tolerance must be >= 0 or 'auto', got {tol}")
        except ValueError:
            errors.append(f"eval.tolerance must be an integer or 'auto', got {e['tolerance']!r}")
    try:
        fractions = _floats(x["budget_fractions"])
        check(fractions and all(0 < f <= 1 for f in fractions),
              "experiments.budget_fractions must be values in (0, 1]")
    except ValueError:
        errors.append("experiments.budget_fractions must be a comma-separated list of numbers")
        fractions = ()
    try:
        grid = _ints(x["timing_grid"])
        check(grid and all(g >= 0 for g in grid), "experiments.timing_grid must be non-negative integers")
    except ValueError:
        errors.append("experiments.timing_grid must be a comma-separated list of integers")
        grid = ()
    check(0 <= x["refine_max_n"] <= d["num_frames"],
          f"experiments.refine_max_n must lie in 0..{d['num_frames']}, got {x['refine_max_n']}")
    check(x["refine_sequences"] >= 1, "experiments.refine_sequences must be >= 1")
    check(x["timing_sequences"] >= 1, "experiments.timing_sequences must be >= 1")
    if errors:
        raise ConfigError(errors)
    return RunConfig(
        root=root, master_seed=d["master_seed"], n_train=d["n_train"], n_val=d["n_val"],
        frame_size=d["frame_size"], num_frames=d["num_frames"],
        parent=TrainConfig(**stage["parent"]), subset_fraction=p["subset_fraction"],
        oneshot=TrainConfig(**stage["oneshot"]),
        snap=SnapConfig(s["contour_threshold"], s["majority"]), tolerance=tol,
        budget_fractions=fractions, refine_max_n=x["refine_max_n"],
        refine_sequences=x["refine_sequences"], timing_grid=grid,
        timing_sequences=x["timing_sequences"])


def validate_config(path, require_root: bool = True) -> RunConfig:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file {p} not found")
    return parse_config_text(p.read_text(), require_root)


# ---------------------------------------------------------------- helpers

def _config(args, require_root=True) -> RunConfig:
    cfg = validate_config(args.config, require_root) if args.config else parse_config_text("", False)
    if require_root and not args.config:
        raise ConfigError(["data.root: a --config naming the dataset is required"])
    if args.seed is not None:
        cfg.master_seed = args.seed
        cfg.parent = cfg.parent.replace(seed=args.seed)
        cfg.oneshot = cfg.oneshot.replace(seed=args.seed)
    return cfg


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _manifest(out: Path, command: str, cfg: RunConfig | None, extra=None) -> None:
    m = {
        "command": command,
        "argv": sys.argv[1:],
        "artifact_version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "config": asdict(cfg) if cfg is not None else None,
    }
    if extra:
        m.update(extra)
    _write_json(out / RUN_MANIFEST, m)


def _require(path) -> Path:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"{p} does not exist")
    return p


def _load_weights(path, tag: str) -> StageWeights:
    return StageWeights(tag, nnet.load_checkpoint(_require(path)))


def _dataset(cfg: RunConfig):
    return read_benchmark(_require(cfg.root))


def _find_sequence(ds, name: str):
    for s in ds.train + ds.val:
        if s.name == name:
            return s
    raise FileNotFoundError(f"sequence {name!r} not in dataset")


def _save_masks(d: Path, masks) -> None:
    d.mkdir(parents=True, exist_ok=True)
    for t, m in enumerate(masks):
        save_mask(d / f"{t:05d}.pgm", m)


def _mask_sets(d: Path) -> dict[str, list]:
    """Either a directory of ``.pgm`` masks (one sequence) or one subdirectory per
    sequence holding masks directly or under ``gt/``."""
    d = _require(d)
    if any(n.endswith(".pgm") for n in os.listdir(d)):
        return {(d.parent if d.name == "gt" else d).name: load_mask_dir(d)}
    out = {}
    for sub in sorted(p for p in d.iterdir() if p.is_dir()):
        src = sub / "gt" if (sub / "gt").is_dir() else sub
        masks = load_mask_dir(src)
        if masks:
            out[sub.name] = masks
    if not out:
        raise FileNotFoundError(f"no masks found under {d}")
    return out


def _paired_sets(pred_dir, gt_dir):
    preds, gts = _mask_sets(Path(pred_dir)), _mask_sets(Path(gt_dir))
    if len(preds) == 1 and len(gts) == 1:
        (pn, p), (_, g) = next(iter(preds.items())), next(iter(gts.items()))
        return {pn: (p, g)}
    missing = sorted(set(gts) - set(preds))
    if missing:
        raise FileNotFoundError(f"no predictions for sequences {missing}")
    return {n: (preds[n], gts[n]) for n in gts}


def _oneshot_cfg(cfg: RunConfig, args) -> TrainConfig:
    if getattr(args, "iters", None) is not None:
        return cfg.oneshot.replace(iterations=args.iters)
    return cfg.oneshot


def _parent_for(cfg: RunConfig, args, ds) -> StageWeights:
    if getattr(args, "parent", None):
        return _load_weights(args.parent, "parent")
    return train_parent(ds.train, cfg.parent, cfg.subset_fraction)


# ---------------------------------------------------------------- subcommands

def cmd_generate(args) -> dict:
    cfg = _config(args, require_root=False)
    ds = make_benchmark(cfg.master_seed, cfg.n_train, cfg.n_val,
                        frame_size=cfg.frame_size, num_frames=cfg.num_frames)
    write_benchmark(ds, args.out)
    _manifest(args.out, "generate", cfg)
    return {"train": len(ds.train), "val": len(ds.val)}


def cmd_train_parent(args) -> dict:
    cfg = _config(args)
    ds = _dataset(cfg)
    pcfg = cfg.parent if args.iters is None else cfg.parent.replace(iterations=args.iters)
    frac = args.subset_fraction if args.subset_fraction is not None else cfg.subset_fraction
    base = base_weights(pcfg.seed)
    w = train_parent(ds.train, pcfg, frac, base)
    nnet.save_checkpoint(w.model, args.out / "parent.oswt")
    _write_json(args.out / "train_log.json", {"loss": w.log, "subset_fraction": frac})
    _manifest(args.out, "train-parent", cfg)
    return {"final_loss": w.log[-1] if w.log else None}


def cmd_finetune(args) -> dict:
    cfg = _config(args)
    ds = _dataset(cfg)
    parent = _load_weights(args.parent, "parent")
    seq = _find_sequence(ds, args.sequence)
    frames = _ints(args.frames)
    w = finetune_oneshot(parent, seq, {t: seq.gt[t] for t in frames}, _oneshot_cfg(cfg, args))
    nnet.save_checkpoint(w.model, args.out / f"{seq.name}.oswt")
    _write_json(args.out / f"{seq.name}.log.json", {"loss": w.log, "annotated": list(w.annotated)})
    _manifest(args.out, "finetune", cfg)
    return {"annotated": list(w.annotated)}


def cmd_infer(args) -> dict:
    cfg = _config(args)
    w = _load_weights(args.weights, "oneshot")
    seq = load_sequence(_require(cfg.root), args.sequence)
    maps = infer_sequence(w, seq)
    for t, (fg, ct) in enumerate(maps):
        for kind, arr in (("fg", fg), ("ct", ct)):
            d = args.out / seq.name / kind
            d.mkdir(parents=True, exist_ok=True)
            save_probmap(d / f"{t:05d}.pmap", arr)
    _manifest(args.out, "infer", cfg)
    return {"frames": len(maps)}


def _pmaps(d) -> list:
    d = _require(d)
    names = sorted(n for n in os.listdir(d) if n.endswith(".pmap"))
    if not names:
        raise FileNotFoundError(f"no .pmap files in {d}")
    return [load_probmap(Path(d) / n) for n in names]


def cmd_snap(args) -> dict:
    fgs, cts = _pmaps(args.fg), _pmaps(args.contours)
    if len(fgs) != len(cts):
        raise UsageError("foreground and contour directories hold different frame counts")
    scfg = SnapConfig(args.contour_threshold, args.majority)
    masks = [snap(f, c, scfg) for f, c in zip(fgs, cts)]
    _save_masks(args.out, masks)
    _manifest(args.out, "snap", None, {"snap": asdict(scfg)})
    return {"frames": len(masks)}


def cmd_evaluate(args) -> dict:
    pairs = _paired_sets(args.pred, args.gt)
    reports = [evaluate_sequence(n, p, g, args.tolerance) for n, (p, g) in pairs.items()]
    out = {"summary": summarize(reports), "sequences": {r.name: r.summary() for r in reports}}
    _write_json(args.out / "evaluation.json", out)
    with open(args.out / "per_frame.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("seq", "frame", "J", "F"))
        for r in reports:
            w.writerows((r.name, t, f"{s.j:.6f}", f"{s.f:.6f}") for t, s in enumerate(r.frames))
    _manifest(args.out, "evaluate", None)
    return out["summary"]


def cmd_track_eval(args) -> dict:
    pairs = _paired_sets(args.pred, args.gt)
    preds = [m for p, _ in pairs.values() for m in p]
    gts = [m for _, g in pairs.values() for m in g]
    curve = tracker_eval(preds, gts)
    out = dict(zip((f"{t:.1f}" for t in curve.thresholds), curve.success))
    _write_json(args.out / "tracker.json", out)
    _manifest(args.out, "track-eval", None)
    return out


def _ablation_stage(cfg, args, ds, parent, out: Path):
    base = base_weights(cfg.parent.seed)
    res = run_ablation(parent, base, ds.val, _oneshot_cfg(cfg, args), cfg.snap, VARIANTS, args.workers)
    for v, per_seq in res.masks.items():
        for name, masks in per_seq.items():
            _save_masks(out / "masks" / v / name, masks)
    _write_json(out / "ablation.json", {
        "mean_j": {v: res.mean_j(v) for v in res.variants},
        "deltas": res.deltas(),
    })
    return res


def cmd_ablate(args) -> dict:
    cfg = _config(args)
    ds = _dataset(cfg)
    res = _ablation_stage(cfg, args, ds, _parent_for(cfg, args, ds), args.out)
    _manifest(args.out, "ablate", cfg)
    return {v: res.mean_j(v) for v in res.variants}


def _refine_stage(cfg, args, ds, parent, out: Path):
    traces = [progressive_refine(parent, s, cfg.refine_max_n, _oneshot_cfg(cfg, args), cfg.snap)
              for s in ds.val[:cfg.refine_sequences]]
    _write_json(out / "refinement.json", {
        tr.sequence: [{"n": n, "frames": list(f), "j": j} for n, f, j in tr.steps] for tr in traces})
    return traces


def cmd_refine(args) -> dict:
    cfg = _config(args)
    ds = _dataset(cfg)
    traces = _refine_stage(cfg, args, ds, _parent_for(cfg, args, ds), args.out)
    _manifest(args.out, "refine", cfg)
    return {tr.sequence: tr.j_values() for tr in traces}


def _timing_stage(cfg, args, ds, parent, out: Path):
    pts = timing_profile(parent, ds.val[:cfg.timing_sequences], cfg.timing_grid,
                         _oneshot_cfg(cfg, args), cfg.snap)
    # wall-clock numbers vary between runs, so they stay outside the report bundle
    _write_json(out / "timing.json", [asdict(p) for p in pts])
    return pts


def cmd_timing(args) -> dict:
    cfg = _config(args)
    ds = _dataset(cfg)
    pts = _timing_stage(cfg, args, ds, _parent_for(cfg, args, ds), args.out)
    _manifest(args.out, "timing", cfg)
    return {f"{p.mode}@{p.iterations}": p.j_mean for p in pts}


def _budget_stage(cfg, args, ds, out: Path, parent_full=None):
    """-BS mean J of parents trained on fractions of the training frames."""
    res = {}
    base = base_weights(cfg.parent.seed)
    for f in cfg.budget_fractions:
        if f == cfg.subset_fraction and parent_full is not None:
            parent = parent_full
        else:
            parent = train_parent(ds.train, cfg.parent, f, base)
        r = run_ablation(parent, base, ds.val, _oneshot_cfg(cfg, args), cfg.snap, ("-BS",), args.workers)
        res[f"{f:g}"] = r.mean_j("-BS")
    _write_json(out / "budget.json", res)
    return res


def _load_run(run: Path, cfg: RunConfig) -> ReportInputs:
    ds = _dataset(cfg)
    gts = {s.name: list(s.gt) for s in ds.val}
    masks_root = _require(run / "masks")
    masks, reports = {}, {}
    for v in VARIANTS:
        d = masks_root / v
        if not d.is_dir():
            continue
        masks[v] = {name: load_mask_dir(d / name) for name in gts if (d / name).is_dir()}
        reports[v] = [evaluate_sequence(n, m, gts[n], cfg.tolerance) for n, m in masks[v].items()]
    if not reports:
        raise FileNotFoundError(f"no variant masks under {masks_root}")
    inputs = ReportInputs(reports, masks, gts, {s.name: sorted(s.attributes) for s in ds.val},
                          meta={"config": cfg.snapshot()})
    if "Ours" in reports:
        inputs.deltas = AblationResult(tuple(reports), reports, masks).deltas()
    if (run / "refinement.json").is_file():
        for name, steps in json.loads((run / "refinement.json").read_text()).items():
            inputs.refinement.append(
                RefinementTrace(name, [(s["n"], tuple(s["frames"]), s["j"]) for s in steps]))
    if (run / "timing.json").is_file():
        inputs.timing = [TimingPoint(**p) for p in json.loads((run / "timing.json").read_text())]
    for key in ("budget", "bounds"):
        f = run / f"{key}.json"
        if f.is_file():
            setattr(inputs, key, json.loads(f.read_text()))
    return inputs


def cmd_analyze(args) -> dict:
    cfg = _config(args)
    run = Path(args.run) if args.run else args.out
    inputs = _load_run(run, cfg)
    paths = assemble_report(inputs, args.out / "report")
    _manifest(args.out, "analyze", cfg)
    return {k: str(v) for k, v in paths.items()}


def cmd_full_suite(args) -> dict:
    out: Path = args.out
    if args.config:
        cfg = validate_config(args.config, require_root=False)
    else:
        cfg = parse_config_text("", False)
    if args.seed is not None:
        cfg.master_seed = args.seed
    cfg.root = str(out / "data")
    ds = make_benchmark(cfg.master_seed, cfg.n_train, cfg.n_val,
                        frame_size=cfg.frame_size, num_frames=cfg.num_frames)
    write_benchmark(ds, cfg.root)
    stamps = {}
    t0 = time.perf_counter()
    parent = train_parent(ds.train, cfg.parent, cfg.subset_fraction)
    nnet.save_checkpoint(parent.model, out / "parent.oswt")
    stamps["parent"] = time.perf_counter() - t0
    res = _ablation_stage(cfg, args, ds, parent, out)
    stamps["ablation"] = time.perf_counter() - t0
    bounds = oracle_bounds({s.name: list(s.gt) for s in ds.val}, res.maps, cfg.snap)
    _write_json(out / "bounds.json", bounds)
    _budget_stage(cfg, args, ds, out, parent)
    stamps["budget"] = time.perf_counter() - t0
    _refine_stage(cfg, args, ds, parent, out)
    stamps["refine"] = time.perf_counter() - t0
    _timing_stage(cfg, args, ds, parent, out)
    stamps["timing"] = time.perf_counter() - t0
    paths = assemble_report(_load_run(out, cfg), out / "report")
    _manifest(out, "full-suite", cfg, {"stage_seconds": stamps})
    return {k: str(v) for k, v in paths.items()}


# ---------------------------------------------------------------- argument parsing

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI-style run configuration")
    common.add_argument("--seed", type=int, help="override every seed in the configuration")
    common.add_argument("--out", type=Path, required=True, help="output directory")
    common.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    common.add_argument("--iters", type=int, help="override the trained stage's iteration count")

    ap = argparse.ArgumentParser(prog="oneshot-vos", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", metavar="SUBCOMMAND")
    sub.required = True

    def add(name, fn, help_):
        p = sub.add_parser(name, parents=[common], help=help_)
        p.set_defaults(fn=fn)
        return p

    add("generate", cmd_generate, "write the synthetic benchmark")
    p = add("train-parent", cmd_train_parent, "train the parent network")
    p.add_argument("--subset-fraction", type=float)
    p = add("finetune", cmd_finetune, "fine-tune a parent on annotated frames")
    p.add_argument("--parent", required=True)
    p.add_argument("--sequence", required=True)
    p.add_argument("--frames", default="0", help="comma-separated annotated frame indices")
    p = add("infer", cmd_infer, "write per-frame foreground and contour maps")
    p.add_argument("--weights", required=True)
    p.add_argument("--sequence", required=True)
    p = add("snap", cmd_snap, "snap foreground maps to contour superpixels")
    p.add_argument("--fg", required=True)
    p.add_argument("--contours", required=True)
    p.add_argument("--majority", type=float, default=0.5)
    p.add_argument("--contour-threshold", type=float, default=0.5)
    for name, fn, h in (("evaluate", cmd_evaluate, "J/F/T of predicted masks"),
                        ("track-eval", cmd_track_eval, "bounding-box success rates")):
        p = add(name, fn, h)
        p.add_argument("--pred", required=True)
        p.add_argument("--gt", required=True)
        if name == "evaluate":
            p.add_argument("--tolerance", type=int)
    for name, fn, h in (("ablate", cmd_ablate, "component ablation on the validation split"),
                        ("refine", cmd_refine, "progressive refinement traces"),
                        ("timing", cmd_timing, "quality against per-frame cost")):
        p = add(name, fn, h)
        p.add_argument("--parent", help="parent checkpoint; trained from the config when omitted")
    p = add("analyze", cmd_analyze, "assemble the report bundle from a run directory")
    p.add_argument("--run", help="run directory (defaults to --out)")
    add("full-suite", cmd_full_suite, "every experiment end to end plus the report")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    if args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        result = args.fn(args)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (FileNotFoundError, MaskFormatError) as exc:
        print(f"missing or unreadable input: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(json.dumps(result, indent=2, sort_keys=True, default=str))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Deterministic moving-shapes video benchmark.

A scene is a muted procedural background, optional distractor objects, the
target object on top of them, and an optional occluder on top of everything
during a frame window. Objects bounce inside the frame along straight lines
and may grow or shrink. Ground truth is the target silhouette minus whatever
the occluder covers.

All randomness comes from :mod:`oneshot_vos.rng`; a frame depends only on the
scene description and its index.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .maskcore import VideoSequence, load_sequence, quantize, save_sequence
from .rng import SplitMix64, _mix64_array, derive_seed

ATTRIBUTES = ("OCC", "FM", "AC", "DB", "MB")
FAST_MOTION = 1.5  # px / frame
_NOISE, _TRAIN, _VAL = 1, 2, 3


@dataclass(frozen=True)
class Texture:
    kind: str  # checker | gradient | speckle | flat
    color_a: tuple[float, float, float]
    color_b: tuple[float, float, float]
    period: float = 4.0
    direction: tuple[float, float] = (1.0, 0.0)
    seed: int = 0


@dataclass(frozen=True)
class Shape:
    kind: str  # ellipse | polygon | rect
    size: tuple[float, float]  # (ry, rx) half extents
    texture: Texture
    start: tuple[float, float]  # centre (y, x) at t = 0
    velocity: tuple[float, float] = (0.0, 0.0)
    scale_rate: float = 0.0
    vertices: tuple = ()  # polygon: unit-radius (dy, dx) offsets
    bounce_size: tuple[float, float] | None = None  # half extents used for wall bounces

    def scale(self, t: int) -> float:
        return max(0.2, 1.0 + self.scale_rate * t)

    def center(self, t: int, size: int) -> tuple[float, float]:
        s = self.scale(t)
        extent = self.bounce_size or self.size
        return tuple(_bounce(p + v * t, r * s, size - r * s)
                     for p, v, r in zip(self.start, self.velocity, extent))


@dataclass(frozen=True)
class SceneSpec:
    seed: int
    target: Shape
    background: Texture
    frame_size: int = 64
    num_frames: int = 20
    distractors: tuple[Shape, ...] = ()
    occluder: Shape | None = None
    occluder_window: tuple[int, int] = (0, 0)  # [enter, exit)
    background_drift: tuple[float, float] = (0.0, 0.0)
    motion_blur: bool = False
    noise_sigma: float = 0.0
    # per-channel gain reached at the last frame; frame t uses a linear ramp from 1
    illumination: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if self.num_frames < 2:
            raise ValueError("a scene needs at least two frames")

    def gain(self, t: int) -> np.ndarray:
        a = t / (self.num_frames - 1)
        return 1.0 + a * (np.array(self.illumination) - 1.0)

    def occluded(self, t: int) -> bool:
        return self.occluder is not None and self.occluder_window[0] <= t < self.occluder_window[1]


def _bounce(p: float, lo: float, hi: float) -> float:
    """Reflect ``p`` into ``[lo, hi]`` (triangle wave)."""
    if hi <= lo:
        return (lo + hi) / 2
    span = hi - lo
    q = (p - lo) % (2 * span)
    return lo + (q if q <= span else 2 * span - q)


# ---------------------------------------------------------------- rasterisation

def _grid(size: int):
    c = np.arange(size) + 0.5
    return np.meshgrid(c, c, indexing="ij")


def silhouette(shape: Shape, t: int, size: int) -> np.ndarray:
    yy, xx = _grid(size)
    cy, cx = shape.center(t, size)
    s = shape.scale(t)
    ry, rx = shape.size[0] * s, shape.size[1] * s
    dy, dx = yy - cy, xx - cx
    if shape.kind == "ellipse":
        return (dy / ry) ** 2 + (dx / rx) ** 2 <= 1.0
    if shape.kind == "rect":
        return (np.abs(dy) <= ry) & (np.abs(dx) <= rx)
    if shape.kind == "polygon":
        vy = np.array([v[0] for v in shape.vertices]) * ry
        vx = np.array([v[1] for v in shape.vertices]) * rx
        inside = np.zeros((size, size), dtype=bool)
        n = len(vy)
        for i in range(n):
            y0, x0, y1, x1 = vy[i], vx[i], vy[(i + 1) % n], vx[(i + 1) % n]
            if y0 == y1:
                continue
            crosses = (y0 > dy) != (y1 > dy)
            x_at = x0 + (dy - y0) * (x1 - x0) / (y1 - y0)
            inside ^= crosses & (dx < x_at)
        return inside
    raise ValueError(f"unknown shape kind {shape.kind!r}")


def _texture(tex: Texture, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    a, b = np.array(tex.color_a), np.array(tex.color_b)
    if tex.kind == "flat":
        w = np.zeros_like(u)
    elif tex.kind == "checker":
        w = ((np.floor(u / tex.period) + np.floor(v / tex.period)) % 2).astype(np.float64)
    elif tex.kind == "gradient":
        proj = u * tex.direction[0] + v * tex.direction[1]
        w = np.clip(0.5 + proj / (2 * tex.period), 0.0, 1.0)
    elif tex.kind == "speckle":
        cells = (np.floor(u / 2).astype(np.int64) * 7919 + np.floor(v / 2).astype(np.int64)).astype(np.uint64)
        with np.errstate(over="ignore"):
            h = _mix64_array(cells + np.uint64(tex.seed & ((1 << 64) - 1)))
        w = (h >> np.uint64(63)).astype(np.float64)
    else:
        raise ValueError(f"unknown texture {tex.kind!r}")
    return a + (b - a) * w[..., None]


def _paint(img, shape: Shape, t: int, size: int) -> np.ndarray:
    sil = silhouette(shape, t, size)
    yy, xx = _grid(size)
    cy, cx = shape.center(t, size)
    s = shape.scale(t)
    colors = _texture(shape.texture, (yy - cy) / s, (xx - cx) / s)
    img[sil] = colors[sil]
    return sil


def render_frame(spec: SceneSpec, t: int) -> tuple[np.ndarray, np.ndarray]:
    """Frame ``t`` as ``(H, W, 3)`` image and its ground-truth mask."""
    n = spec.frame_size
    yy, xx = _grid(n)
    img = _texture(spec.background, yy + spec.background_drift[0] * t, xx + spec.background_drift[1] * t)
    for d in spec.distractors:
        _paint(img, d, t, n)
    gt = _paint(img, spec.target, t, n)
    if spec.occluded(t):
        gt = gt & ~_paint(img, spec.occluder, t, n)
    if spec.illumination != (1.0, 1.0, 1.0):
        img = img * spec.gain(t)
    if spec.motion_blur:
        p = np.pad(img, ((0, 0), (1, 1), (0, 0)), mode="edge")
        img = (p[:, :-2] + p[:, 1:-1] + p[:, 2:]) / 3.0
    if spec.noise_sigma > 0:
        rng = SplitMix64(derive_seed(spec.seed, _NOISE, t))
        img = img + spec.noise_sigma * rng.normal(img.shape)
    return quantize(img), gt


def render_sequence(spec: SceneSpec, name: str = "seq", attributes=()) -> VideoSequence:
    frames, gts = [], []
    for t in range(spec.num_frames):
        f, g = render_frame(spec, t)
        f.setflags(write=False)
        g.setflags(write=False)
        frames.append(f)
        gts.append(g)
    return VideoSequence(name, tuple(frames), tuple(gts), frozenset(attributes))


def scene_attributes(spec: SceneSpec) -> frozenset:
    tags = set()
    if spec.occluder is not None and spec.occluder_window[1] > spec.occluder_window[0]:
        tags.add("OCC")
    if math.hypot(*spec.target.velocity) > FAST_MOTION:
        tags.add("FM")
    if abs(spec.target.scale_rate) > 0.01:
        tags.add("AC")
    if spec.background_drift != (0.0, 0.0):
        tags.add("DB")
    if spec.motion_blur:
        tags.add("MB")
    return frozenset(tags)


# ---------------------------------------------------------------- random scenes

def _hsv(h: float, s: float, v: float) -> tuple[float, float, float]:
    i = int(h * 6) % 6
    f = h * 6 - math.floor(h * 6)
    p, q, r = v * (1 - s), v * (1 - f * s), v * (1 - (1 - f) * s)
    return [(v, r, p), (q, v, p), (p, v, r), (p, q, v), (r, p, v), (v, p, q)][i]


def _object_texture(rng: SplitMix64, hue: float) -> Texture:
    kind = rng.choice(("checker", "gradient", "speckle"))
    a = _hsv(hue % 1.0, 0.75 + 0.2 * rng.random(), 0.85 + 0.15 * rng.random())
    b = _hsv((hue + 0.04) % 1.0, 0.8, 0.35 + 0.2 * rng.random())
    ang = 2 * math.pi * rng.random()
    return Texture(kind, a, b, period=3.0 + 3.0 * rng.random(),
                   direction=(math.sin(ang), math.cos(ang)), seed=rng.next_u64())


def _background(rng: SplitMix64) -> Texture:
    hue = rng.random()
    a = _hsv(hue, 0.15 * rng.random(), 0.35 + 0.3 * rng.random())
    b = _hsv((hue + 0.1) % 1.0, 0.15 * rng.random(), 0.35 + 0.3 * rng.random())
    ang = 2 * math.pi * rng.random()
    kind = rng.choice(("gradient", "checker"))
    return Texture(kind, a, b, period=24.0 if kind == "gradient" else 8.0 + 8 * rng.random(),
                   direction=(math.sin(ang), math.cos(ang)))


def _random_shape(rng: SplitMix64, size: int, texture: Texture, speed: float) -> Shape:
    r = size * (0.15 + 0.1 * rng.random())
    aspect = 0.7 + 0.6 * rng.random()
    kind = rng.choice(("ellipse", "polygon"))
    verts = ()
    if kind == "polygon":
        k = rng.integers(5, 9)
        verts = tuple(
            (rad * math.sin(a), rad * math.cos(a))
            for a, rad in ((2 * math.pi * (i + 0.4 * rng.random()) / k, 0.75 + 0.25 * rng.random())
                           for i in range(k)))
    ang = 2 * math.pi * rng.random()
    start = (size * (0.25 + 0.5 * rng.random()), size * (0.25 + 0.5 * rng.random()))
    return Shape(kind, (r * aspect, r / aspect), texture, start,
                 (speed * math.sin(ang), speed * math.cos(ang)), 0.0, verts)


def random_scene(seed: int, *, n_distractors: int = 0, occlusion: bool = False,
                 twin_distractor: bool = False, frame_size: int = 64,
                 num_frames: int = 20, noise_sigma: float = 0.03,
                 illumination: float = 0.3) -> SceneSpec:
    rng = SplitMix64(seed)
    hue = rng.random()
    fast = rng.random() < 0.3
    speed = (1.8 + rng.random()) if fast else (0.3 + 1.0 * rng.random())
    target = _random_shape(rng, frame_size, _object_texture(rng, hue), speed)
    if rng.random() < 0.3:
        target = Shape(target.kind, target.size, target.texture, target.start, target.velocity,
                       rng.choice((-0.015, 0.02)), target.vertices)
    distractors = []
    for i in range(n_distractors):
        # hues kept well away from the target's
        d_hue = hue + 0.3 + 0.4 * rng.random()
        distractors.append(_random_shape(rng, frame_size, _object_texture(rng, d_hue), 0.3 + rng.random()))
    if twin_distractor:
        twin = _random_shape(rng, frame_size, target.texture, 0.3 + rng.random())
        distractors.append(Shape(target.kind, target.size, target.texture, twin.start,
                                 twin.velocity, 0.0, target.vertices))
    occluder, window = None, (0, 0)
    if occlusion:
        # a flat panel riding along with the target, large enough to hide it
        ext = max(target.size) * max(target.scale(t) for t in range(num_frames)) * 1.6 + 2
        grey = 0.45 + 0.2 * rng.random()
        enter = num_frames // 2 - 2
        occluder = Shape("rect", (ext, ext), Texture("flat", (grey,) * 3, (grey,) * 3),
                         target.start, target.velocity, target.scale_rate,
                         bounce_size=target.size)
        window = (enter, enter + 4)
    drift = (0.0, 0.0)
    if rng.random() < 0.25:
        drift = (rng.random() - 0.5, rng.random() - 0.5)
    blur = fast and rng.random() < 0.5
    light = tuple(1.0 + illumination * (2 * rng.random() - 1) for _ in range(3))
    return SceneSpec(seed=seed, target=target, background=_background(rng),
                     frame_size=frame_size, num_frames=num_frames,
                     distractors=tuple(distractors), occluder=occluder, occluder_window=window,
                     background_drift=drift, motion_blur=blur,
                     noise_sigma=noise_sigma, illumination=light)


@dataclass
class SynthDataset:
    train: list[VideoSequence]
    val: list[VideoSequence]
    seeds: dict[str, int] = field(default_factory=dict)
    master_seed: int = 0

    @property
    def attributes(self) -> dict[str, list[str]]:
        return {s.name: sorted(s.attributes) for s in self.train + self.val}


def benchmark_specs(master_seed: int, n_train: int, n_val: int, **kw) -> dict[str, tuple[str, SceneSpec]]:
    if n_train < 1 or n_val < 1:
        raise ValueError("need at least one train and one val sequence")
    out = {}
    for i in range(n_train):
        seed = derive_seed(master_seed, _TRAIN, i)
        out[f"train_{i:03d}"] = ("train", random_scene(seed, **kw))
    for i in range(n_val):
        seed = derive_seed(master_seed, _VAL, i)
        rng = SplitMix64(derive_seed(seed, 99))
        n_d = 1 + (rng.random() < 0.5)
        out[f"val_{i:03d}"] = ("val", random_scene(
            seed, n_distractors=n_d, occlusion=(i % 4 == 0), twin_distractor=(i % 4 == 1), **kw))
    return out


def make_benchmark(master_seed: int, n_train: int = 8, n_val: int = 6, **kw) -> SynthDataset:
    specs = benchmark_specs(master_seed, n_train, n_val, **kw)
    ds = SynthDataset([], [], master_seed=master_seed)
    for name, (split, spec) in specs.items():
        seq = render_sequence(spec, name, scene_attributes(spec))
        getattr(ds, split).append(seq)
        ds.seeds[name] = spec.seed
    train_seeds = {ds.seeds[s.name] for s in ds.train}
    if train_seeds & {ds.seeds[s.name] for s in ds.val}:
        raise RuntimeError("train and val seeds collide")
    return ds


def write_benchmark(ds: SynthDataset, root) -> Path:
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    for seq in ds.train + ds.val:
        save_sequence(root, seq)
    manifest = {
        "master_seed": ds.master_seed,
        "splits": {"train": [s.name for s in ds.train], "val": [s.name for s in ds.val]},
        "seeds": ds.seeds,
        "attributes": ds.attributes,
    }
    (root / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return root


def read_benchmark(root) -> SynthDataset:
    root = Path(root)
    manifest = json.loads((root / "manifest.json").read_text())
    train = [load_sequence(root, n) for n in manifest["splits"]["train"]]
    val = [load_sequence(root, n) for n in manifest["splits"]["val"]]
    return SynthDataset(train, val, manifest["seeds"], manifest["master_seed"])


def spec_to_dict(spec: SceneSpec) -> dict:
    return asdict(spec)

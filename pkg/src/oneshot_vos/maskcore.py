"""Raster types, geometry helpers and file IO.

Representation:

* Mask     -- 2-D ``bool`` array, ``True`` is foreground.
* ProbMap  -- 2-D ``float64`` array with values in ``[0, 1]``.
* Frame    -- ``(H, W)`` or ``(H, W, 3)`` ``float64`` array in ``[0, 1]``.

Coordinates in :class:`BoundingBox` are ``(x, y)`` = (column, row), inclusive.
"""
from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np


class MaskFormatError(ValueError):
    pass


class BoundingBox(NamedTuple):
    x0: int
    y0: int
    x1: int
    y1: int

    @property
    def area(self) -> int:
        return (self.x1 - self.x0 + 1) * (self.y1 - self.y0 + 1)


@dataclass(frozen=True)
class VideoSequence:
    name: str
    frames: tuple
    gt: tuple | None = None
    attributes: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if not self.frames:
            raise ValueError("sequence has no frames")
        shape = self.frames[0].shape[:2]
        for f in self.frames:
            if f.shape[:2] != shape:
                raise ValueError("frames differ in size")
        if self.gt is not None:
            if len(self.gt) != len(self.frames):
                raise ValueError("ground truth length differs from frame count")
            for g in self.gt:
                if g.shape != shape:
                    raise ValueError("ground truth size differs from frame size")

    def __len__(self) -> int:
        return len(self.frames)

    @property
    def shape(self) -> tuple[int, int]:
        return self.frames[0].shape[:2]


def as_mask(m) -> np.ndarray:
    a = np.asarray(m)
    if a.ndim != 2 or a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"mask must be a non-empty 2-D grid, got shape {a.shape}")
    if a.dtype != bool:
        if not np.isin(a, (0, 1)).all():
            raise ValueError("mask values must be 0 or 1")
        a = a.astype(bool)
    return a


def _same_shape(a, b):
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


# ---------------------------------------------------------------- geometry

def bounding_box(m) -> BoundingBox | None:
    m = as_mask(m)
    rows = np.flatnonzero(m.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(m.any(axis=0))
    return BoundingBox(int(cols[0]), int(rows[0]), int(cols[-1]), int(rows[-1]))


def boundary_pixels(m) -> np.ndarray:
    """Foreground pixels with a background (or off-image) 4-neighbour."""
    m = as_mask(m)
    p = np.pad(m, 1, constant_values=False)
    interior = p[:-2, 1:-1] & p[2:, 1:-1] & p[1:-1, :-2] & p[1:-1, 2:]
    return m & ~interior


def dilate3x3(m) -> np.ndarray:
    m = as_mask(m)
    h, w = m.shape
    p = np.pad(m, 1, constant_values=False)
    out = np.zeros_like(m)
    for dy in range(3):
        for dx in range(3):
            out |= p[dy:dy + h, dx:dx + w]
    return out


def threshold(p, tau: float = 0.5) -> np.ndarray:
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"threshold {tau} outside [0, 1]")
    return np.asarray(p) >= tau


def centroid(m) -> tuple[float, float] | None:
    ys, xs = np.nonzero(as_mask(m))
    if ys.size == 0:
        return None
    return float(ys.mean()), float(xs.mean())


def translate(m, dy: int, dx: int) -> np.ndarray:
    """Shift a mask by whole pixels; content moved off the grid is dropped."""
    m = as_mask(m)
    h, w = m.shape
    out = np.zeros_like(m)
    if abs(dy) >= h or abs(dx) >= w:
        return out
    src = m[max(0, -dy):h - max(0, dy), max(0, -dx):w - max(0, dx)]
    out[max(0, dy):max(0, dy) + src.shape[0], max(0, dx):max(0, dx) + src.shape[1]] = src
    return out


def squared_distance_transform(m) -> np.ndarray:
    """Exact squared Euclidean distance to the nearest foreground pixel.

    Column pass computes vertical distances; row pass takes the lower
    envelope of parabolas (Felzenszwalb & Huttenlocher). Integer throughout.
    """
    m = as_mask(m)
    if not m.any():
        raise ValueError("distance transform of empty mask")
    h, w = m.shape
    inf = h + w + 1
    g = np.where(m, 0, inf).astype(np.int64)
    for y in range(1, h):
        g[y] = np.minimum(g[y], g[y - 1] + 1)
    for y in range(h - 2, -1, -1):
        g[y] = np.minimum(g[y], g[y + 1] + 1)
    f = np.where(g >= inf, -1, g * g)
    out = np.empty((h, w), dtype=np.int64)
    for y in range(h):
        out[y] = _envelope_1d(f[y].tolist())
    return out


def _envelope_1d(f: list[int]) -> list[int]:
    # f[q] < 0 marks "no site in this column"
    sites = [q for q, v in enumerate(f) if v >= 0]

    def cross(q, r):
        return ((f[q] + q * q) - (f[r] + r * r)) / (2 * q - 2 * r)

    v = [sites[0]]
    z: list[float] = [-np.inf, np.inf]
    for q in sites[1:]:
        s = cross(q, v[-1])
        while s <= z[len(v) - 1]:
            v.pop()
            z.pop()
            s = cross(q, v[-1])
        z[-1] = s
        v.append(q)
        z.append(np.inf)
    out = []
    k = 0
    for x in range(len(f)):
        while z[k + 1] < x:
            k += 1
        d = x - v[k]
        out.append(d * d + f[v[k]])
    return out


def euclidean_distance_transform(m) -> np.ndarray:
    return np.sqrt(squared_distance_transform(m).astype(np.float64))


# ---------------------------------------------------------------- file IO

def _read_pnm(path) -> tuple[str, int, int, int, bytes]:
    with open(path, "rb") as fh:
        data = fh.read()
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < 4:
        if i >= len(data):
            raise MaskFormatError(f"{path}: truncated header")
        c = data[i:i + 1]
        if c == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
                j += 1
            tokens.append(data[i:j])
            i = j
    i += 1  # single whitespace byte before raster
    magic = tokens[0].decode("ascii", "replace")
    if magic not in ("P5", "P6"):
        raise MaskFormatError(f"{path}: unsupported magic {magic!r}")
    try:
        w, h, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise MaskFormatError(f"{path}: malformed header") from exc
    if w < 1 or h < 1 or not 0 < maxval < 65536:
        raise MaskFormatError(f"{path}: malformed header")
    return magic, w, h, maxval, data[i:]


def _decode_raster(path, raw, w, h, channels, maxval) -> np.ndarray:
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    need = w * h * channels * dtype.itemsize
    if len(raw) < need:
        raise MaskFormatError(f"{path}: raster truncated")
    a = np.frombuffer(raw[:need], dtype=dtype).astype(np.int64)
    return a.reshape(h, w, channels) if channels == 3 else a.reshape(h, w)


def load_mask(path) -> np.ndarray:
    magic, w, h, maxval, raw = _read_pnm(path)
    if magic != "P5":
        raise MaskFormatError(f"{path}: masks must be P5 graymaps")
    a = _decode_raster(path, raw, w, h, 1, maxval)
    bad = np.flatnonzero((a != 0) & (a != maxval))
    if bad.size:
        raise MaskFormatError(f"{path}: non-binary mask (pixel {int(bad[0])} = {int(a.flat[bad[0]])})")
    return a == maxval


def save_mask(path, m) -> None:
    m = as_mask(m)
    h, w = m.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(np.where(m, 255, 0).astype(np.uint8).tobytes())


def load_frame(path) -> np.ndarray:
    magic, w, h, maxval, raw = _read_pnm(path)
    a = _decode_raster(path, raw, w, h, 3 if magic == "P6" else 1, maxval)
    return a / float(maxval)


def quantize(frame) -> np.ndarray:
    """Round to the 8-bit grid so save/load round-trips exactly."""
    return np.round(np.clip(frame, 0.0, 1.0) * 255.0) / 255.0


def save_frame(path, frame) -> None:
    f = np.asarray(frame, dtype=np.float64)
    q = np.round(np.clip(f, 0.0, 1.0) * 255.0).astype(np.uint8)
    h, w = f.shape[:2]
    magic = b"P6" if f.ndim == 3 else b"P5"
    with open(path, "wb") as fh:
        fh.write(b"%s\n%d %d\n255\n" % (magic, w, h))
        fh.write(q.tobytes())


PMAP_MAGIC = b"PMAP"


def save_probmap(path, p) -> None:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 2:
        raise ValueError("probability map must be 2-D")
    h, w = p.shape
    with open(path, "wb") as fh:
        fh.write(PMAP_MAGIC + struct.pack("<III", w, h, 0))
        fh.write(p.astype("<f4").tobytes())


def load_probmap(path) -> np.ndarray:
    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 16 or buf[:4] != PMAP_MAGIC:
        raise MaskFormatError(f"{path}: not a PMAP file")
    w, h, _ = struct.unpack_from("<III", buf, 4)
    if len(buf) < 16 + 4 * w * h:
        raise MaskFormatError(f"{path}: raster truncated")
    a = np.frombuffer(buf, dtype="<f4", count=w * h, offset=16).astype(np.float64)
    return a.reshape(h, w)


# ---------------------------------------------------------------- sequence directories

def _frame_ext(frame) -> str:
    return "ppm" if np.ndim(frame) == 3 else "pgm"


def save_sequence(root, seq: VideoSequence) -> Path:
    d = Path(root) / seq.name
    (d / "frames").mkdir(parents=True, exist_ok=True)
    for t, f in enumerate(seq.frames):
        save_frame(d / "frames" / f"{t:05d}.{_frame_ext(f)}", f)
    if seq.gt is not None:
        (d / "gt").mkdir(exist_ok=True)
        for t, g in enumerate(seq.gt):
            save_mask(d / "gt" / f"{t:05d}.pgm", g)
    if seq.attributes:
        (d / "attributes.txt").write_text("".join(f"{a}\n" for a in sorted(seq.attributes)))
    return d


def load_mask_dir(d) -> list[np.ndarray]:
    names = sorted(n for n in os.listdir(d) if n.endswith(".pgm"))
    return [load_mask(Path(d) / n) for n in names]


def load_sequence(root, name: str) -> VideoSequence:
    d = Path(root) / name
    fdir = d / "frames"
    if not fdir.is_dir():
        raise FileNotFoundError(f"{fdir} does not exist")
    names = sorted(n for n in os.listdir(fdir) if n.endswith((".pgm", ".ppm")))
    frames = tuple(load_frame(fdir / n) for n in names)
    gt = tuple(load_mask_dir(d / "gt")) if (d / "gt").is_dir() else None
    attrs = frozenset()
    if (d / "attributes.txt").exists():
        attrs = frozenset(l.strip() for l in (d / "attributes.txt").read_text().splitlines() if l.strip())
    return VideoSequence(name, frames, gt, attrs)

"""Superpixels from a contour map, boundary snapping, and oracle bounds."""
from __future__ import annotations

import heapq
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import ndimage

from .maskcore import _same_shape, as_mask
from .metrics import region_similarity

_FOUR = ndimage.generate_binary_structure(2, 1)


@dataclass(frozen=True)
class SuperpixelPartition:
    labels: np.ndarray  # int64 region id per pixel, ids 0..count-1
    count: int

    @property
    def shape(self):
        return self.labels.shape

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.count)

    def region(self, i: int) -> np.ndarray:
        return self.labels == i


def _order_seeds(labels: np.ndarray) -> tuple[np.ndarray, int]:
    """Renumber non-negative labels 0..k-1, smallest region first.

    Equal sizes fall back to raster order of first appearance. Small ids win
    flooding ties, so an object's interior claims the contour ridge instead of
    the surrounding background.
    """
    flat = labels.ravel()
    valid = flat >= 0
    ids, first, sizes = np.unique(flat[valid], return_index=True, return_counts=True)
    order = ids[np.lexsort((first, sizes))]
    lut = np.full(int(flat.max()) + 2 if flat.size else 1, -1, dtype=np.int64)
    lut[order] = np.arange(order.size)
    out = np.where(labels >= 0, lut[np.maximum(labels, 0)], -1)
    return out, int(order.size)


def partition_from_contours(contours, strength_threshold: float = 0.5) -> SuperpixelPartition:
    """Seed regions are 4-connected runs of weak-contour pixels; contour pixels
    are then flooded in order of (strength, distance from the seed, region id).

    Region ids are assigned smallest seed first.
    """
    c = np.asarray(contours, dtype=np.float64)
    if not 0.0 < strength_threshold < 1.0:
        raise ValueError("contour threshold must lie in (0, 1)")
    h, w = c.shape
    seeds, n = ndimage.label(c < strength_threshold, structure=_FOUR)
    if n == 0:
        return SuperpixelPartition(np.zeros((h, w), dtype=np.int64), 1)
    labels, n = _order_seeds(seeds.astype(np.int64) - 1)

    heap: list[tuple[float, int, int, int, int]] = []

    def push_neighbours(y, x, lab, depth):
        for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
            if 0 <= ny < h and 0 <= nx < w and labels[ny, nx] < 0:
                heapq.heappush(heap, (c[ny, nx], depth, lab, ny, nx))

    # seed pixels touching an unlabelled pixel start the flood
    unl = labels < 0
    near = ndimage.binary_dilation(unl, structure=_FOUR) & ~unl
    for y, x in zip(*np.nonzero(near)):
        push_neighbours(y, x, labels[y, x], 1)
    while heap:
        _, depth, lab, y, x = heapq.heappop(heap)
        if labels[y, x] >= 0:
            continue
        labels[y, x] = lab
        push_neighbours(y, x, lab, depth + 1)
    labels.setflags(write=False)
    return SuperpixelPartition(labels, n)


def region_means(values, part: SuperpixelPartition) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    _same_shape(v, part.labels)
    sums = np.bincount(part.labels.ravel(), weights=v.ravel(), minlength=part.count)
    return sums / part.sizes()


def snap_mask(fg, part: SuperpixelPartition, majority: float = 0.5) -> np.ndarray:
    """Whole regions whose mean foreground probability is at least ``majority``."""
    if not 0.0 < majority <= 1.0:
        raise ValueError("majority must lie in (0, 1]")
    keep = region_means(fg, part) >= majority
    return keep[part.labels]


@dataclass(frozen=True)
class SnapConfig:
    contour_threshold: float = 0.5
    majority: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.contour_threshold < 1.0:
            raise ValueError("contour_threshold must lie in (0, 1)")
        if not 0.0 < self.majority <= 1.0:
            raise ValueError("majority must lie in (0, 1]")


def snap(fg, contours, cfg: SnapConfig = SnapConfig()) -> np.ndarray:
    """Partition from ``contours`` then majority relabel of ``fg``."""
    return snap_mask(fg, partition_from_contours(contours, cfg.contour_threshold), cfg.majority)


def best_proposal_oracle(candidates, gt) -> tuple[int, float]:
    candidates = list(candidates)
    if not candidates:
        raise ValueError("no candidates")
    best_i, best_j = 0, -1.0
    for i, m in enumerate(candidates):
        j = region_similarity(m, gt)
        if j > best_j:
            best_i, best_j = i, j
    return best_i, best_j


def dinkelbach_select(a, b, total: int):
    """Maximise ``sum(a[S]) / (total + sum(b[S]))`` over subsets ``S``.

    Returns ``(selected bool array, optimal ratio as Fraction, ratio history)``.
    Each round keeps the items with ``a - ratio * b > 0``; the achieved ratio
    rises strictly until the selection stops changing.
    """
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    ratio = Fraction(0)
    selected = np.zeros(a.size, dtype=bool)
    history = []
    while True:
        num, den = ratio.numerator, ratio.denominator
        gain = a * den - b * num  # sign of a - ratio * b, exact
        new = (a > 0) & ((gain > 0) | ((gain == 0) & (b == 0)))
        new_ratio = Fraction(int(a[new].sum()), total + int(b[new].sum()))
        if history and new_ratio <= ratio:
            break
        selected, ratio = new, new_ratio
        history.append(ratio)
    return selected, ratio, history


def best_superpixel_oracle(part: SuperpixelPartition, gt) -> tuple[np.ndarray, float]:
    """Union of regions with the highest IoU against ``gt``."""
    gt = as_mask(gt)
    _same_shape(gt, part.labels)
    g = int(np.count_nonzero(gt))
    if g == 0:
        raise ValueError("superpixel oracle needs a non-empty ground truth")
    a = np.bincount(part.labels[gt], minlength=part.count)
    b = part.sizes() - a
    selected, ratio, _ = dinkelbach_select(a, b, g)
    return selected[part.labels], float(ratio)

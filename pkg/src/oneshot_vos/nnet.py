"""A small fully-convolutional network with hand-written reverse mode.

Encoder stage ``s`` is two 3x3 convolutions with ReLU, preceded by a 2x2 max
pool for every stage except the first. Each stage feeds two side heads (a
1x1 convolution down to one channel), one for foreground and one for
contours. Side outputs are brought back to full resolution by frozen
bilinear upsamplers and combined by a learned 1x1 fusion.

Everything is float64. Batches are ``(B, C, H, W)`` arrays. Inputs in
``[0, 1]`` are centred by a fixed ``-0.5`` shift before the first layer.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .maskcore import boundary_pixels, dilate3x3
from .rng import SplitMix64

HEADS = ("fg", "ct")
INPUT_SHIFT = 0.5
DEFAULT_WIDTHS = (8, 16, 32)

_OFFSETS = [(dy, dx) for dy in range(3) for dx in range(3)]


class PaddingRequired(ValueError):
    """Input spatial size is not divisible by the total pooling factor."""


@dataclass
class FcnModel:
    in_channels: int
    widths: tuple[int, ...]
    params: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def n_stages(self) -> int:
        return len(self.widths)

    def copy(self) -> "FcnModel":
        return FcnModel(self.in_channels, tuple(self.widths),
                        {k: v.copy() for k, v in self.params.items()})

    def param_names(self) -> list[str]:
        return list(self.params)

    def n_params(self) -> int:
        return sum(v.size for v in self.params.values())


def param_shapes(in_channels: int, widths) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    c_in = in_channels
    for s, c in enumerate(widths):
        shapes[f"stage{s}.conv0.w"] = (c, c_in, 3, 3)
        shapes[f"stage{s}.conv0.b"] = (c,)
        shapes[f"stage{s}.conv1.w"] = (c, c, 3, 3)
        shapes[f"stage{s}.conv1.b"] = (c,)
        c_in = c
    for head in HEADS:
        for s, c in enumerate(widths):
            shapes[f"{head}.side{s}.w"] = (c,)
            shapes[f"{head}.side{s}.b"] = (1,)
        shapes[f"{head}.fuse.w"] = (len(widths),)
        shapes[f"{head}.fuse.b"] = (1,)
    return shapes


def init_model(seed: int, in_channels: int = 3, widths=DEFAULT_WIDTHS) -> FcnModel:
    """He fan-in initialisation from the seeded generator; biases zero."""
    rng = SplitMix64(seed)
    params = {}
    for name, shape in param_shapes(in_channels, widths).items():
        if name.endswith(".b"):
            params[name] = np.zeros(shape)
            continue
        fan_in = int(np.prod(shape[1:])) if len(shape) == 4 else shape[0]
        params[name] = rng.normal(shape) * np.sqrt(2.0 / fan_in)
    return FcnModel(in_channels, tuple(widths), params)


def zeros_model(in_channels: int = 3, widths=DEFAULT_WIDTHS) -> FcnModel:
    params = {k: np.zeros(s) for k, s in param_shapes(in_channels, widths).items()}
    return FcnModel(in_channels, tuple(widths), params)


# ---------------------------------------------------------------- layers

def _im2col(x: np.ndarray) -> np.ndarray:
    b, c, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (1, 1), (1, 1)))
    cols = np.empty((b, c, 9, h, w))
    for k, (dy, dx) in enumerate(_OFFSETS):
        cols[:, :, k] = xp[:, :, dy:dy + h, dx:dx + w]
    return cols.reshape(b, c * 9, h * w)


def _col2im(dcols: np.ndarray, shape) -> np.ndarray:
    b, c, h, w = shape
    dcols = dcols.reshape(b, c, 9, h, w)
    dxp = np.zeros((b, c, h + 2, w + 2))
    for k, (dy, dx) in enumerate(_OFFSETS):
        dxp[:, :, dy:dy + h, dx:dx + w] += dcols[:, :, k]
    return dxp[:, :, 1:-1, 1:-1]


def conv3x3(x, w, b):
    cols = _im2col(x)
    out = w.reshape(w.shape[0], -1) @ cols + b[None, :, None]
    return out.reshape(x.shape[0], w.shape[0], *x.shape[2:]), cols


def conv3x3_backward(dout, cols, w, x_shape):
    bsz, o = dout.shape[:2]
    d = dout.reshape(bsz, o, -1)
    dw = np.einsum("boi,bki->ok", d, cols).reshape(w.shape)
    db = d.sum(axis=(0, 2))
    dcols = w.reshape(o, -1).T @ d
    return _col2im(dcols, x_shape), dw, db


def maxpool2(x):
    b, c, h, w = x.shape
    win = x.reshape(b, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h // 2, w // 2, 4)
    idx = win.argmax(axis=-1)
    out = np.take_along_axis(win, idx[..., None], axis=-1)[..., 0]
    return out, idx


def maxpool2_backward(dout, idx, x_shape):
    b, c, h, w = x_shape
    dwin = np.zeros((b, c, h // 2, w // 2, 4))
    np.put_along_axis(dwin, idx[..., None], dout[..., None], axis=-1)
    return dwin.reshape(b, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(x_shape)


@lru_cache(maxsize=None)
def bilinear_matrix(n_in: int, factor: int) -> np.ndarray:
    """Frozen 1-D bilinear interpolation operator, half-pixel centres."""
    n_out = n_in * factor
    m = np.zeros((n_out, n_in))
    for i in range(n_out):
        src = (i + 0.5) / factor - 0.5
        src = min(max(src, 0.0), n_in - 1.0)
        lo = int(np.floor(src))
        hi = min(lo + 1, n_in - 1)
        t = src - lo
        m[i, lo] += 1.0 - t
        m[i, hi] += t
    m.setflags(write=False)
    return m


def _upsample(x, factor):
    if factor == 1:
        return x
    uh = bilinear_matrix(x.shape[-2], factor)
    uw = bilinear_matrix(x.shape[-1], factor)
    return uh @ x @ uw.T


def _upsample_backward(d, factor, small_shape):
    if factor == 1:
        return d
    uh = bilinear_matrix(small_shape[0], factor)
    uw = bilinear_matrix(small_shape[1], factor)
    return uh.T @ d @ uw


def sigmoid(x):
    return np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))),
                    np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))


# ---------------------------------------------------------------- forward / backward

def _as_batch(model: FcnModel, frames) -> np.ndarray:
    x = np.asarray(frames, dtype=np.float64)
    if x.ndim == 2:
        x = x[None, None]
    elif x.ndim == 3:
        # a single (H, W, C) frame
        x = x.transpose(2, 0, 1)[None]
    elif x.ndim == 4:
        x = x.transpose(0, 3, 1, 2)
    if x.shape[1] != model.in_channels:
        raise ValueError(f"model expects {model.in_channels} channels, got {x.shape[1]}")
    div = 2 ** (model.n_stages - 1)
    if x.shape[2] % div or x.shape[3] % div:
        raise PaddingRequired(
            f"frame {x.shape[2]}x{x.shape[3]} not divisible by {div}; pad the input")
    if not np.all(np.isfinite(x)):
        raise ValueError("non-finite input")
    return x


def forward_logits(model: FcnModel, x: np.ndarray, keep_cache: bool = False):
    """Fused logits for a ``(B, C, H, W)`` batch; returns ``(fg, ct, cache)``."""
    p = model.params
    cache = {"x_shape": x.shape, "stages": []}
    feats = []
    h = x - INPUT_SHIFT
    for s in range(model.n_stages):
        st = {}
        if s > 0:
            st["pool_in_shape"] = h.shape
            h, st["pool_idx"] = maxpool2(h)
        st["in0_shape"] = h.shape
        z0, st["cols0"] = conv3x3(h, p[f"stage{s}.conv0.w"], p[f"stage{s}.conv0.b"])
        a0 = np.maximum(z0, 0.0)
        st["mask0"] = z0 > 0
        z1, st["cols1"] = conv3x3(a0, p[f"stage{s}.conv1.w"], p[f"stage{s}.conv1.b"])
        h = np.maximum(z1, 0.0)
        st["mask1"] = z1 > 0
        st["in1_shape"] = a0.shape
        feats.append(h)
        if keep_cache:
            cache["stages"].append(st)
    cache["feats"] = feats
    outs = {}
    for head in HEADS:
        ups = []
        for s, f in enumerate(feats):
            side = np.einsum("c,bchw->bhw", p[f"{head}.side{s}.w"], f) + p[f"{head}.side{s}.b"][0]
            ups.append(_upsample(side, 2 ** s))
        cache[f"{head}.ups"] = ups
        fused = p[f"{head}.fuse.b"][0] + sum(wf * u for wf, u in zip(p[f"{head}.fuse.w"], ups))
        if not np.all(np.isfinite(fused)):
            raise FloatingPointError(f"non-finite {head} logits")
        outs[head] = fused
    return outs["fg"], outs["ct"], cache


def forward(model: FcnModel, frame) -> tuple[np.ndarray, np.ndarray]:
    """Foreground and contour probability maps for one ``(H, W, C)`` frame."""
    x = _as_batch(model, frame)
    fg, ct, _ = forward_logits(model, x)
    return sigmoid(fg[0]), sigmoid(ct[0])


def forward_batch(model: FcnModel, frames) -> tuple[np.ndarray, np.ndarray]:
    x = _as_batch(model, frames)
    fg, ct, _ = forward_logits(model, x)
    return sigmoid(fg), sigmoid(ct)


def balanced_bce_loss(logits, target, pos_weight="balanced"):
    """Class-balanced binary cross-entropy on logits.

    ``pos_weight`` is ``"balanced"`` or a float ``w`` (then w+ = w, w- = 1).
    Returns ``(loss, dloss/dlogits)``; the mean runs over every pixel of the
    batch but class weights are computed per image.
    """
    x = np.asarray(logits, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch {x.shape} vs {y.shape}")
    batched = x.ndim == 3
    xb = x if batched else x[None]
    yb = y if batched else y[None]
    n_img = xb[0].size
    if pos_weight == "balanced":
        n_pos = yb.sum(axis=(1, 2))
        n_neg = n_img - n_pos
        both = (n_pos > 0) & (n_neg > 0)
        wp = np.where(both, n_img / (2.0 * np.maximum(n_pos, 1)), 1.0)[:, None, None]
        wn = np.where(both, n_img / (2.0 * np.maximum(n_neg, 1)), 1.0)[:, None, None]
    else:
        wp, wn = float(pos_weight), 1.0
    n = xb.size
    # log sigma(x) = -softplus(-x), log(1 - sigma(x)) = -softplus(x)
    sp_neg = np.logaddexp(0.0, -xb)
    sp_pos = np.logaddexp(0.0, xb)
    loss = (wp * yb * sp_neg + wn * (1.0 - yb) * sp_pos).sum() / n
    sig = sigmoid(xb)
    grad = (-wp * yb * (1.0 - sig) + wn * (1.0 - yb) * sig) / n
    return float(loss), (grad if batched else grad[0])


def loss_and_grads(model: FcnModel, x: np.ndarray, fg_target, ct_target,
                   contour_weight: float = 1.0, pos_weight="balanced"):
    """Total loss ``fg + contour_weight * contour`` and gradients of every parameter."""
    p = model.params
    fg, ct, cache = forward_logits(model, x, keep_cache=True)
    l_fg, d_fg = balanced_bce_loss(fg, fg_target, pos_weight)
    l_ct, d_ct = balanced_bce_loss(ct, ct_target, pos_weight)
    d_ct = contour_weight * d_ct
    grads: dict[str, np.ndarray] = {}
    feats = cache["feats"]
    dfeats = [np.zeros_like(f) for f in feats]
    for head, dlog in (("fg", d_fg), ("ct", d_ct)):
        ups = cache[f"{head}.ups"]
        grads[f"{head}.fuse.b"] = np.array([dlog.sum()])
        grads[f"{head}.fuse.w"] = np.array([(dlog * u).sum() for u in ups])
        for s, f in enumerate(feats):
            dup = p[f"{head}.fuse.w"][s] * dlog
            dside = _upsample_backward(dup, 2 ** s, f.shape[2:])
            grads[f"{head}.side{s}.b"] = np.array([dside.sum()])
            grads[f"{head}.side{s}.w"] = np.einsum("bhw,bchw->c", dside, f)
            dfeats[s] += p[f"{head}.side{s}.w"][None, :, None, None] * dside[:, None]
    dh = None
    for s in reversed(range(model.n_stages)):
        st = cache["stages"][s]
        d = dfeats[s] if dh is None else dfeats[s] + dh
        d = d * st["mask1"]
        da0, grads[f"stage{s}.conv1.w"], grads[f"stage{s}.conv1.b"] = conv3x3_backward(
            d, st["cols1"], p[f"stage{s}.conv1.w"], st["in1_shape"])
        da0 = da0 * st["mask0"]
        dh, grads[f"stage{s}.conv0.w"], grads[f"stage{s}.conv0.b"] = conv3x3_backward(
            da0, st["cols0"], p[f"stage{s}.conv0.w"], st["in0_shape"])
        if s > 0:
            dh = maxpool2_backward(dh, st["pool_idx"], st["pool_in_shape"])
    grads = {k: grads[k] for k in p}
    return l_fg + contour_weight * l_ct, grads


def backward(model: FcnModel, frame, targets, contour_weight: float = 1.0,
             pos_weight="balanced"):
    """Loss and exact parameter gradients for one frame and its (fg, contour) masks.

    Upsamplers are not parameters, so no gradient is produced for them.
    """
    fg_mask, ct_mask = targets
    x = _as_batch(model, frame)
    return loss_and_grads(model, x, np.asarray(fg_mask)[None], np.asarray(ct_mask)[None],
                          contour_weight, pos_weight)


def sgd_step(params, grads, velocity, lr: float, momentum: float):
    """Classic momentum: ``v <- mu v - lr g``; ``p <- p + v``. Returns new dicts."""
    new_p, new_v = {}, {}
    for k, value in params.items():
        v = momentum * velocity.get(k, 0.0) - lr * grads[k]
        new_v[k] = v
        new_p[k] = value + v
    return new_p, new_v


def contour_target(gt) -> np.ndarray:
    """Boundary of ``gt`` dilated by a 3x3 square."""
    return dilate3x3(boundary_pixels(gt))


# ---------------------------------------------------------------- checkpoints

CKPT_MAGIC = b"OSWT"
CKPT_VERSION = 1


def save_checkpoint(model: FcnModel, path) -> None:
    """Binary layout (little-endian): magic, u32 version, u32 in_channels,
    u32 n_stages, u32 widths..., u32 n_params, then per parameter
    u32 name_len, name, u32 ndim, u32 dims..., f64 values."""
    parts = [CKPT_MAGIC, struct.pack("<III", CKPT_VERSION, model.in_channels, model.n_stages),
             struct.pack(f"<{model.n_stages}I", *model.widths),
             struct.pack("<I", len(model.params))]
    for name, arr in model.params.items():
        raw = name.encode()
        parts.append(struct.pack("<I", len(raw)) + raw)
        parts.append(struct.pack(f"<I{arr.ndim}I", arr.ndim, *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_checkpoint(path) -> FcnModel:
    with open(path, "rb") as fh:
        buf = fh.read()
    if buf[:4] != CKPT_MAGIC:
        raise ValueError(f"{path}: not a weight checkpoint")
    version, in_ch, n_stages = struct.unpack_from("<III", buf, 4)
    if version != CKPT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    off = 16
    widths = struct.unpack_from(f"<{n_stages}I", buf, off)
    off += 4 * n_stages
    (count,) = struct.unpack_from("<I", buf, off)
    off += 4
    params = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<I", buf, off)
        off += 4
        name = buf[off:off + nlen].decode()
        off += nlen
        (ndim,) = struct.unpack_from("<I", buf, off)
        shape = struct.unpack_from(f"<{ndim}I", buf, off + 4)
        off += 4 + 4 * ndim
        size = int(np.prod(shape))
        params[name] = np.frombuffer(buf, dtype="<f8", count=size, offset=off).astype(np.float64).reshape(shape)
        off += 8 * size
    expected = param_shapes(in_ch, widths)
    if {k: v.shape for k, v in params.items()} != expected:
        raise ValueError(f"{path}: parameter set does not match architecture")
    return FcnModel(in_ch, tuple(widths), params)

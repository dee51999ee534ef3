"""Slow, obviously-correct reference implementations used as test oracles."""
import numpy as np


def brute_sq_edt(m):
    """Squared distance from every pixel to the nearest foreground pixel, by exhaustive search."""
    m = np.asarray(m, dtype=bool)
    fy, fx = np.nonzero(m)
    yy, xx = np.indices(m.shape)
    d2 = (yy[..., None] - fy) ** 2 + (xx[..., None] - fx) ** 2
    return d2.min(axis=-1)


def brute_edt(m):
    return np.sqrt(brute_sq_edt(m).astype(np.float64))


def brute_boundary(m):
    m = np.asarray(m, dtype=bool)
    h, w = m.shape
    out = np.zeros_like(m)
    for y in range(h):
        for x in range(w):
            if not m[y, x]:
                continue
            for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                if not (0 <= ny < h and 0 <= nx < w) or not m[ny, nx]:
                    out[y, x] = True
    return out


def brute_dilate(m):
    m = np.asarray(m, dtype=bool)
    h, w = m.shape
    out = np.zeros_like(m)
    for y, x in zip(*np.nonzero(m)):
        out[max(0, y - 1):y + 2, max(0, x - 1):x + 2] = True
    return out


def brute_f(pred, gt, tol):
    """Boundary F-measure by pairwise boundary distances."""
    bp = list(zip(*np.nonzero(brute_boundary(pred))))
    bg = list(zip(*np.nonzero(brute_boundary(gt))))
    if not bp and not bg:
        return 1.0
    if not bp or not bg:
        return 0.0

    def frac(src, dst):
        return sum(any((a - c) ** 2 + (b - d) ** 2 <= tol * tol for c, d in dst) for a, b in src) / len(src)

    p, r = frac(bp, bg), frac(bg, bp)
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def brute_subset_iou(labels, gt):
    """Best IoU over every non-empty union of regions (all 2^n - 1 subsets)."""
    n = int(labels.max()) + 1
    inside = np.array([np.count_nonzero((labels == i) & gt) for i in range(n)], dtype=np.int64)
    outside = np.array([np.count_nonzero((labels == i) & ~gt) for i in range(n)], dtype=np.int64)
    subsets = (np.arange(1, 2 ** n)[:, None] >> np.arange(n)) & 1
    inter = subsets @ inside
    union = np.count_nonzero(gt) + subsets @ outside
    return max(int(i) / int(u) for i, u in zip(inter, union))


def brute_components(m):
    """4-connected components by flood fill; returns the number of components."""
    m = np.asarray(m, dtype=bool)
    seen = np.zeros_like(m)
    h, w = m.shape
    count = 0
    for y in range(h):
        for x in range(w):
            if m[y, x] and not seen[y, x]:
                count += 1
                stack = [(y, x)]
                seen[y, x] = True
                while stack:
                    a, b = stack.pop()
                    for c, d in ((a - 1, b), (a + 1, b), (a, b - 1), (a, b + 1)):
                        if 0 <= c < h and 0 <= d < w and m[c, d] and not seen[c, d]:
                            seen[c, d] = True
                            stack.append((c, d))
    return count


def numeric_grad_errors(model, x, fg, ct, contour_weight=1.0, pos_weight="balanced", eps=1e-4):
    """Worst relative error between analytic and central-difference gradients, per parameter."""
    from oneshot_vos import nnet

    _, grads = nnet.loss_and_grads(model, x, fg, ct, contour_weight, pos_weight)
    worst = {}
    for name, arr in model.params.items():
        err = 0.0
        for i in range(arr.size):
            old = arr.flat[i]
            arr.flat[i] = old + eps
            up = nnet.loss_and_grads(model, x, fg, ct, contour_weight, pos_weight)[0]
            arr.flat[i] = old - eps
            down = nnet.loss_and_grads(model, x, fg, ct, contour_weight, pos_weight)[0]
            arr.flat[i] = old
            num = (up - down) / (2 * eps)
            ana = grads[name].flat[i]
            err = max(err, abs(num - ana) / max(abs(num), abs(ana), 1e-7))
        worst[name] = err
    return worst


def kink_margin(model, x):
    """Smallest distance of any ReLU input from 0 or any max-pool winner from the runner-up.

    Finite differences are only meaningful when a perturbation cannot cross one of these.
    """
    from oneshot_vos import nnet

    p = model.params
    h = x - nnet.INPUT_SHIFT
    margin = np.inf
    for s in range(model.n_stages):
        if s > 0:
            b, c, hh, ww = h.shape
            win = np.sort(h.reshape(b, c, hh // 2, 2, ww // 2, 2).transpose(0, 1, 2, 4, 3, 5)
                          .reshape(b, c, hh // 2, ww // 2, 4), axis=-1)
            margin = min(margin, float((win[..., 3] - win[..., 2]).min()))
            h = win[..., 3]
        for conv in ("conv0", "conv1"):
            z, _ = nnet.conv3x3(h, p[f"stage{s}.{conv}.w"], p[f"stage{s}.{conv}.b"])
            margin = min(margin, float(np.abs(z).min()))
            h = np.maximum(z, 0.0)
    return margin


def smooth_case(seed, in_ch=1, widths=(2, 3), size=6, margin=2e-3):
    """A random model, input and targets at least ``margin`` away from every kink.

    Seeds are tried in order ``seed, seed + 1000, ...`` so the case is deterministic.
    """
    from oneshot_vos import nnet

    for k in range(200):
        r = np.random.default_rng(seed + 1000 * k)
        m = nnet.init_model(seed + 1000 * k, in_ch, widths)
        for name in m.params:
            m.params[name] = m.params[name] + 0.1 * r.standard_normal(m.params[name].shape)
        x = r.random((1, in_ch, size, size))
        if kink_margin(m, x) >= margin:
            fg = (r.random((1, size, size)) < 0.4).astype(float)
            ct = (r.random((1, size, size)) < 0.3).astype(float)
            return m, x, fg, ct
    raise RuntimeError("no kink-free case found")

"""Hand-derived metric fixtures, each with the value worked out by hand."""
import numpy as np


def grid(h, w, cells=()):
    m = np.zeros((h, w), bool)
    for y, x in cells:
        m[y, x] = True
    return m


def square(size, y0, x0, side):
    m = np.zeros((size, size), bool)
    m[y0:y0 + side, x0:x0 + side] = True
    return m


_blob = square(8, 2, 2, 3)

# (label, pred, gt, expected J)
J_CASES = [
    ("identity", _blob, _blob, 1.0),
    ("disjoint", square(8, 0, 0, 2), square(8, 5, 5, 2), 0.0),
    ("one shared of three", grid(2, 2, [(0, 0), (0, 1)]), grid(2, 2, [(0, 1), (1, 1)]), 1 / 3),
    ("both empty", grid(3, 3), grid(3, 3), 1.0),
    ("empty prediction", grid(3, 3), grid(3, 3, [(1, 1)]), 0.0),
    ("nested 4 of 9", square(6, 1, 1, 2), square(6, 1, 1, 3), 4 / 9),
]

# (label, pred, gt, tol, expected F)
F_CASES = [
    ("identity", _blob, _blob, 1, 1.0),
    ("both empty", grid(4, 4), grid(4, 4), 1, 1.0),
    ("one empty", grid(4, 4), grid(4, 4, [(2, 2)]), 1, 0.0),
    # 12-px ring sits 2 px inside the 28-px ring: P = 1, R = 16/28
    ("concentric squares", square(16, 6, 6, 4), square(16, 4, 4, 8), 2, 8 / 11),
    ("shift 1 tol 2", square(12, 3, 3, 5), square(12, 3, 4, 5), 2, 1.0),
    ("shift 10 tol 2", square(20, 2, 2, 3), square(20, 2, 12, 3), 2, 0.0),
    # rings of 8 share 4 pixels exactly
    ("shift 1 tol 0", square(5, 1, 0, 3), square(5, 1, 1, 3), 0, 0.5),
]

# (label, values, (M, O, D))
AGG_CASES = [
    ("constant", [0.8] * 7, (0.8, 1.0, 0.0)),
    ("step down", [1, 1, 0, 0], (0.5, 0.5, 1.0)),
    ("ties at threshold", [0.5] * 4, (0.5, 0.0, 0.0)),
    # quartile size ceil(5/4) = 2
    ("ramp of five", [0.2, 0.4, 0.6, 0.8, 1.0], (0.6, 0.6, -0.6)),
    ("single frame", [0.3], (0.3, 0.0, 0.0)),
]

# square grows 4 -> 8 about a fixed centroid; tol 2 gives F = 8/11
T_GROWTH = ([square(16, 6, 6, 4), square(16, 4, 4, 8)], 2, 100 * 3 / 11)

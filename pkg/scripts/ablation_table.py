"""Print the component ablation table on the validation split.

Trains the parent from scratch (about half a minute), fine-tunes each
validation sequence and prints mean J/F/T per variant along with the drop
relative to the full pipeline.
"""
import argparse
import time

from oneshot_vos.protocol import ONESHOT_CONFIG, PARENT_CONFIG, VARIANTS, base_weights, run_ablation, train_parent
from oneshot_vos.snap import SnapConfig
from oneshot_vos.synthvid import make_benchmark


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--n-train", type=int, default=16)
    ap.add_argument("--n-val", type=int, default=8)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    bench = make_benchmark(args.seed, args.n_train, args.n_val)
    t0 = time.perf_counter()
    base = base_weights(PARENT_CONFIG.seed)
    parent = train_parent(bench.train, PARENT_CONFIG, 1.0, base)
    res = run_ablation(parent, base, bench.val, ONESHOT_CONFIG, SnapConfig(), VARIANTS, args.workers)
    deltas = res.deltas()
    print(f"{'variant':<11}{'J':>7}{'F':>7}{'T':>7}{'dJ':>8}")
    for v in VARIANTS:
        rs = res.reports[v]
        j, f, t = (sum(getattr(r, k) for r in rs) / len(rs) for k in ("j_mean", "f_mean", "t_mean"))
        dj = f"{deltas[v]['J']:+8.3f}" if v in deltas else ""
        print(f"{v:<11}{j:7.3f}{f:7.3f}{t:7.3f}{dj}")
    print(f"{time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()

"""Quality of the boundary-free pipeline as the parent sees fewer training frames."""
import argparse

from oneshot_vos.protocol import ONESHOT_CONFIG, PARENT_CONFIG, base_weights, run_ablation, train_parent
from oneshot_vos.synthvid import make_benchmark


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=7)
    ap.add_argument("--fractions", default="0.1,0.25,0.5,1.0")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    bench = make_benchmark(args.seed, 16, 8)
    base = base_weights(PARENT_CONFIG.seed)
    for f in (float(x) for x in args.fractions.split(",")):
        parent = train_parent(bench.train, PARENT_CONFIG, f, base)
        res = run_ablation(parent, base, bench.val, ONESHOT_CONFIG, variants=("-BS",), workers=args.workers)
        print(f"fraction {f:5.2f}  J {res.mean_j('-BS'):.3f}", flush=True)


if __name__ == "__main__":
    main()

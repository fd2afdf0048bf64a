"""Parameter sweep on the desk corpus, averaged over several library splits.

    python scripts/sweep.py --axis sample_count --grid 80,160,320,ALL --seeds 0 1 2
    python scripts/sweep.py --axis epochs --out runs/epochs.tsv

Prints one line per (channel, grid value) with the mean and spread of F1 and
accuracy across split seeds; --out keeps every per-seed row as TSV.
"""

import argparse
import logging
import tempfile
import time
from collections import defaultdict
from pathlib import Path

import numpy as np

from tpldetect import synth, tune
from tpldetect.ingest import open_archive


def parse_grid(text):
    return tuple(None if v.strip().upper() == "ALL" else int(v) for v in text.split(","))


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--axis", choices=[a.value for a in tune.Axis], default="epochs")
    ap.add_argument("--grid", type=parse_grid, help="comma-separated values; ALL = whole corpus")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0])
    ap.add_argument("--corpus", type=Path, help="existing desk directory (default: generate one)")
    ap.add_argument("--corpus-seed", type=int, default=7)
    ap.add_argument("--mode", choices=[m.value for m in tune.ThresholdMode], default="midpoint")
    ap.add_argument("--out", type=Path)
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)

    t0 = time.perf_counter()
    root = args.corpus or Path(tempfile.mkdtemp(prefix="desk-"))
    if args.corpus is None:
        synth.build_desk_corpus(root, seed=args.corpus_seed)
    archives = [open_archive(p) for p in sorted(root.glob("lib-*"))]
    corpora = tune.build_corpora(archives)

    axis = tune.Axis(args.axis)
    if args.grid:
        scenario = tune.SweepScenario(axis, args.grid)
    else:
        # the sample-count grid is scaled to the training split, about 80% of the files
        n_train = int(0.8 * max(len(c.docs) for c in corpora))
        scenario = tune.default_scenario(axis, n_train, step=max(1, n_train // 6))

    rows = []
    for seed in args.seeds:
        rows += tune.sweep(corpora, scenario, pair_seed=seed, split_seed=seed,
                           mode=tune.ThresholdMode(args.mode))
    if args.out:
        tune.write_report(rows, args.out)

    groups = defaultdict(list)
    for r in rows:
        groups[(r.point["channel"], r.point["sample_count"] if axis is tune.Axis.SAMPLE_COUNT
                else r.point["value"])].append(r)
    print(f"{'channel':<9} {axis.value:>12} {'f1':>7} {'±':>6} {'acc':>7} {'gap':>7}")
    for (channel, value), rs in groups.items():
        f1 = np.array([r.f1 for r in rs])
        acc = np.mean([r.accuracy for r in rs])
        gap = np.mean([r.same_mean - r.different_mean for r in rs])
        print(f"{channel:<9} {value!s:>12} {f1.mean():7.3f} {f1.std():6.3f} {acc:7.3f} {gap:7.3f}")
    print(f"{len(rows)} runs in {time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()

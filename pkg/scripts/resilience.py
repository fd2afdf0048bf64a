"""How well same-file pairs survive each obfuscation transform.

For every transform the threshold comes from untransformed pairs of the same
held-out libraries; the table reports the share of transformed copies that
still score above it. Package renaming is also checked for exact token
invariance on every class of the corpus.

    python scripts/resilience.py --rates 0.1 0.2 0.5
"""

import argparse
import tempfile
import time
from pathlib import Path

from tpldetect import synth, tune
from tpldetect.classfile import parse_classfile
from tpldetect.core import Channel
from tpldetect.ingest import open_archive
from tpldetect.normalize import disassemble
from tpldetect.obfuscate import TransformKind, TransformSpec, rename_packages_bytes


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--corpus", type=Path)
    ap.add_argument("--seed", type=int, default=5, help="transform seed")
    ap.add_argument("--split-seed", type=int, default=0)
    ap.add_argument("--rates", type=float, nargs="+", default=[0.2],
                    help="statement-insert rates to try")
    args = ap.parse_args()

    t0 = time.perf_counter()
    root = args.corpus or Path(tempfile.mkdtemp(prefix="desk-"))
    if args.corpus is None:
        synth.build_desk_corpus(root)
    archives = [open_archive(p) for p in sorted(root.glob("lib-*"))]
    corpora = {c.channel: c for c in tune.build_corpora(archives)}

    classes = [e.raw_bytes for a in archives if a.language.value == "java" for e in a.entries]
    same = sum(disassemble(parse_classfile(rename_packages_bytes(raw, i))).tokens
               == disassemble(parse_classfile(raw)).tokens for i, raw in enumerate(classes))
    print(f"package-rename: {same}/{len(classes)} classes keep an identical token stream")

    specs = [TransformSpec(TransformKind.PACKAGE_RENAME, args.seed)]
    specs += [TransformSpec(TransformKind.FUNCTION_RENAME_RELOCATE, args.seed)]
    specs += [TransformSpec(TransformKind.STATEMENT_INSERT, args.seed, rate) for rate in args.rates]
    specs += [TransformSpec(TransformKind.IDENTIFIER_RENAME, args.seed)]
    scenario = tune.SweepScenario(tune.Axis.EPOCHS, (10,))
    print(f"{'transform':<26} {'channel':<9} {'same':>7} {'thresh':>7} {'above':>7}")
    for spec in specs:
        channel = Channel.BYTECODE if spec.kind is TransformKind.PACKAGE_RENAME else Channel.SOURCE
        (r,) = tune.sweep([corpora[channel]], scenario, split_seed=args.split_seed, transform=spec)
        label = spec.kind.value + (f" {spec.rate:g}" if spec.kind is TransformKind.STATEMENT_INSERT
                                   else "")
        print(f"{label:<26} {channel.value:<9} {r.same_mean:7.3f} {r.threshold:7.3f} {r.recall:7.3f}")
    print(f"done in {time.perf_counter() - t0:.0f}s")


if __name__ == "__main__":
    main()

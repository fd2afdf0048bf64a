"""Generate the synthetic desk corpus and a catalog that `tpldetect ingest` reads.

    python scripts/build_corpus.py out/desk
    tpldetect ingest out/desk/catalog.tsv --out out/desk/manifest.tsv

Foreign libraries go to a separate catalog so they stay out of the reference set.
"""

import argparse
from pathlib import Path

from tpldetect import synth


def write_catalog(path: Path, archives, category: str) -> None:
    with path.open("w", encoding="utf-8") as fh:
        fh.write("# location\tname\tversion\tcategory\tstars\n")
        for i, p in enumerate(archives):
            fh.write(f"{p.name}\t{p.stem}\t1.{i % 7}.0\t{category}\t{5 + i % 40}\n")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("root", type=Path)
    ap.add_argument("--java", type=int, default=60)
    ap.add_argument("--python", type=int, default=60)
    ap.add_argument("--files", type=int, default=10, help="files per library")
    ap.add_argument("--foreign", type=int, default=3, help="foreign libraries per language")
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    args.root.mkdir(parents=True, exist_ok=True)
    desk = synth.build_desk_corpus(args.root, args.java, args.python, args.files,
                                   args.foreign, args.seed)
    write_catalog(args.root / "catalog.tsv", desk.reference, "reference")
    write_catalog(args.root / "foreign.tsv", desk.foreign, "foreign")
    size = sum(p.stat().st_size for p in desk.reference + desk.foreign)
    print(f"{len(desk.reference)} reference and {len(desk.foreign)} foreign archives "
          f"({size / 1e6:.1f} MB) under {args.root}")


if __name__ == "__main__":
    main()

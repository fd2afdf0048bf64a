"""Command-line entry point: ``tpldetect <command> ...``.

Exit codes (stable):

    0  success, or the checked archive is relevant
    1  the checked archive is irrelevant
    2  usage, configuration, input or format error
    3  empty corpus (nothing to train or tune on)
    4  duplicate library id while indexing
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import tune as tuning
from .config import CONFIG_ENV, ConfigError, RunConfig, load_config, model_filename, override
from .core import Channel, Language, TPLDetectError
from .detect import Normalizer, RequiredChannels, check, library_vectors
from .embed import DocVector, EmptyCorpus, Lib2VecModel, train
from .index import DuplicateLibrary, ReferenceIndex
from .ingest import (LibraryArchive, LibraryMetadata, check_corpus_constraints, fetch_catalog,
                     open_archive)
from .obfuscate import TransformKind, TransformSpec

log = logging.getLogger("tpldetect")

EXIT_OK, EXIT_IRRELEVANT, EXIT_ERROR, EXIT_EMPTY, EXIT_DUPLICATE = 0, 1, 2, 3, 4

MANIFEST_COLUMNS = ("status", "archive_id", "language", "path", "name", "version", "category",
                    "star_count", "reason", "detail")


# --------------------------------------------------------------------------
# helpers


def _emit(fmt: str, record: dict, table: str) -> None:
    if fmt == "json":
        print(json.dumps(record, indent=2, sort_keys=False))
    elif fmt == "kv":
        for key, value in _flatten(record):
            print(f"{key}={value}")
    else:
        print(table, end="" if table.endswith("\n") else "\n")


def _flatten(record, prefix=""):
    if isinstance(record, dict):
        for k, v in record.items():
            yield from _flatten(v, f"{prefix}{k}.")
    elif isinstance(record, list):
        for i, v in enumerate(record, 1):
            yield from _flatten(v, f"{prefix}{i}.")
    else:
        yield prefix[:-1], record


def read_manifest(path) -> list[LibraryArchive]:
    """Accepted archives of a manifest written by ``tpldetect ingest``."""
    path = Path(path)
    archives = []
    with path.open(encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh, delimiter="\t"):
            if row.get("status") != "accepted":
                continue
            stars = row.get("star_count") or ""
            meta = LibraryMetadata(row["name"] or row["archive_id"], row.get("version", ""),
                                   row.get("category", ""),
                                   star_count=int(stars) if stars else None)
            target = Path(row["path"])
            if not target.is_absolute():
                target = path.parent / target
            archives.append(open_archive(target, Language(row["language"]), meta,
                                         row["archive_id"]))
    return archives


def load_inputs(paths) -> list[LibraryArchive]:
    """Archives named directly, or through manifests (``.tsv``)."""
    archives = []
    for p in paths:
        p = Path(p)
        if p.suffix == ".tsv":
            archives += read_manifest(p)
        else:
            archives.append(open_archive(p))
    return archives


def load_models(cfg: RunConfig, seed: int | None = None) -> dict:
    models = {}
    for lang in Language:
        for ch in Channel:
            path = cfg.model_path(lang, ch)
            if path is not None and path.is_file():
                model = Lib2VecModel.load(path)
                if seed is not None:
                    model.config = dataclasses.replace(model.config, seed=seed)
                models[(lang, ch)] = model
    if not models:
        raise ConfigError("no model files found; run `tpldetect train` or set [paths] models")
    return models


def _normalizer(cfg: RunConfig) -> Normalizer:
    return Normalizer(adapters=dict(cfg.adapters))


def _corpus_paths(args, cfg: RunConfig) -> list[Path]:
    paths = [Path(p) for p in (args.inputs or cfg.corpus)]
    if not paths:
        raise ConfigError("no corpus given (pass archives/manifests or set [paths] corpus)")
    for p in paths:
        if not p.exists():
            raise ConfigError(f"{p} does not exist")
    return paths


# --------------------------------------------------------------------------
# commands


def cmd_ingest(args, cfg: RunConfig) -> int:
    catalog = Path(args.catalog)
    if not catalog.is_file():
        raise ConfigError(f"catalog {catalog} not found")
    out = Path(args.out)
    dest = Path(args.dest) if args.dest else out.parent / "archives"
    fetched = fetch_catalog(catalog, dest, workers=args.workers or 4)
    rows, seen = [], set()
    for archive in fetched.archives:
        meta = archive.metadata
        row = {"archive_id": archive.id, "language": archive.language.value,
               "path": str(archive.path.resolve()), "name": meta.name, "version": meta.version,
               "category": meta.category,
               "star_count": "" if meta.star_count is None else meta.star_count}
        result = check_corpus_constraints(archive, min_file_bytes=cfg.detection.min_file_bytes)
        if archive.id in seen:
            row.update(status="rejected", reason="DuplicateId", detail="archive id already listed")
        elif result.accepted:
            row.update(status="accepted", reason="", detail="")
        else:
            row.update(status="rejected", reason=result.reason, detail=result.detail)
        seen.add(archive.id)
        rows.append(row)
    for location, error in fetched.failures:
        rows.append({"status": "rejected", "archive_id": "", "language": "", "path": location,
                     "name": "", "version": "", "category": "", "star_count": "",
                     "reason": "Unreadable", "detail": error})
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, MANIFEST_COLUMNS, delimiter="\t", lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    accepted = sum(r["status"] == "accepted" for r in rows)
    record = {"manifest": str(out), "accepted": accepted, "rejected": len(rows) - accepted}
    table = "\n".join(f"{r['status']:<9} {r['archive_id'] or r['path']:<30} "
                      f"{r['reason'] or ''}" for r in rows)
    _emit(args.format, record, f"{table}\n{accepted} accepted, {len(rows) - accepted} rejected")
    return EXIT_OK


def cmd_train(args, cfg: RunConfig) -> int:
    archives = load_inputs(_corpus_paths(args, cfg))
    corpora = tuning.build_corpora(archives, _normalizer(cfg), cfg.detection.min_file_bytes)
    if not corpora:
        raise EmptyCorpus("no documents in the corpus")
    out = Path(args.out) if args.out else cfg.models_dir
    if out is None:
        raise ConfigError("no output directory (--out or [paths] models)")
    out.mkdir(parents=True, exist_ok=True)
    record, lines = {"models": []}, []
    for corpus in corpora:
        model = train(corpus.docs, cfg.training, corpus.channel, corpus.language)
        path = out / model_filename(corpus.language, corpus.channel)
        model.save(path)
        c = model.config
        record["models"].append({"path": str(path), "language": corpus.language.value,
                                 "channel": corpus.channel.value, "docs": model.training_doc_count,
                                 "vocabulary": len(model.vocab), "epochs": c.epochs,
                                 "vector_size": c.vector_size, "seed": c.seed})
        lines.append(f"{corpus.language.value:<7} {corpus.channel.value:<9} "
                     f"docs={model.training_doc_count:<6} vocab={len(model.vocab):<6} "
                     f"epochs={c.epochs} vector_size={c.vector_size} -> {path}")
    _emit(args.format, record, "\n".join(lines))
    return EXIT_OK


def _answers(index: ReferenceIndex, probes, k: int):
    return [[(m.doc_id, m.score) for m in index.query_top_k(p, ch, k)] for ch, p in probes]


def cmd_index(args, cfg: RunConfig) -> int:
    models = load_models(cfg, args.seed)
    archives = load_inputs(_corpus_paths(args, cfg))
    out = Path(args.out) if args.out else cfg.index_dir
    if out is None:
        raise ConfigError("no index directory (--out or [paths] index)")
    index = ReferenceIndex()
    normalizer = _normalizer(cfg)
    for archive in archives:
        vectors = library_vectors(archive, models, normalizer, cfg.detection.min_file_bytes,
                                  args.workers or 1)
        index.add_library(archive.id, archive.metadata, vectors)
    index.save(out)
    record = {"index": str(out), "libraries": len(index.catalog), "vectors": len(index)}
    if args.verify:
        reloaded = ReferenceIndex.load(out)
        rng = np.random.default_rng(args.seed or 0)
        recs = list(index.records())
        picks = rng.choice(len(recs), size=min(100, len(recs)), replace=False) if recs else []
        probes = [(recs[i][1], DocVector("probe", recs[i][3])) for i in picks]
        ok = _answers(index, probes, 5) == _answers(reloaded, probes, 5)
        record["verify"] = "pass" if ok else "fail"
        if not ok:
            _emit(args.format, record, f"index {out}: round-trip verification FAILED")
            return EXIT_ERROR
    _emit(args.format, record, f"indexed {record['libraries']} libraries "
                               f"({record['vectors']} vectors) -> {out}"
                               + (f"\nround-trip verification: {record['verify']}"
                                  if args.verify else ""))
    return EXIT_OK


def _check_table(verdict, report) -> str:
    lines = [f"archive   {verdict.archive_id}", f"label     {verdict.label.value}",
             f"files     {verdict.file_count} (N = {verdict.required})"]
    for ch in verdict.channels:
        lines.append(f"{ch.value:<9} {verdict.matched_count[ch]}/{verdict.file_count} matched")
    lines.append("")
    if report.ranking:
        lines.append(f"top-{report.k} similar libraries")
        lines.append(f"  {'#':>2}  {'library':<30} {'files':>5}  {'score':>9}")
        for i, r in enumerate(report.ranking, 1):
            lines.append(f"  {i:>2}  {r.library_id:<30} {r.matched_files:>5}  {r.score:>9.5f}")
    else:
        lines.append("no similar library above the threshold")
    return "\n".join(lines)


def cmd_check(args, cfg: RunConfig) -> int:
    if cfg.index_dir is None:
        raise ConfigError("no index directory (--index or [paths] index)")
    models = load_models(cfg, args.seed)
    index = ReferenceIndex.load(cfg.index_dir)
    archive = open_archive(args.archive)
    verdict, report = check(archive, models, index, cfg.detection, _normalizer(cfg),
                            args.workers or 1)
    record = {
        "archive": verdict.archive_id,
        "label": verdict.label.value,
        "files": verdict.file_count,
        "required": verdict.required,
        "matched": {ch.value: verdict.matched_count[ch] for ch in verdict.channels},
        "similar": [{"library": r.library_id, "files": r.matched_files,
                     "score": round(r.score, 6)} for r in report.ranking],
    }
    if args.per_file:
        record["per_file"] = [
            {"path": f.relative_path,
             **{ch.value: round(s.score, 6) for ch, s in f.channels.items()}}
            for f in verdict.per_file]
    _emit(args.format, record, _check_table(verdict, report))
    return EXIT_OK if verdict.relevant else EXIT_IRRELEVANT


def cmd_tune(args, cfg: RunConfig) -> int:
    archives = load_inputs(_corpus_paths(args, cfg))
    corpora = tuning.build_corpora(archives, _normalizer(cfg), cfg.detection.min_file_bytes)
    if args.channel:
        corpora = [c for c in corpora if c.channel.value == args.channel]
    if not corpora:
        raise EmptyCorpus("no documents in the corpus")
    axis = tuning.Axis(args.axis)
    if args.grid:
        grid = tuple(None if v.upper() == "ALL" else int(v) for v in args.grid.split(","))
        scenario = tuning.SweepScenario(axis, grid, cfg.training)
    else:
        size = max(len(c.docs) for c in corpora)
        scenario = tuning.default_scenario(axis, size, args.step, cfg.training)
    transform = None
    if args.transform:
        transform = TransformSpec(TransformKind(args.transform), seed=args.seed or 0,
                                  rate=args.rate)
    seed = args.seed or 0
    results = tuning.sweep(corpora, scenario, pair_seed=seed, split_seed=seed,
                           n_pairs=args.pairs, mode=tuning.ThresholdMode(args.mode),
                           transform=transform)
    path = tuning.write_report(results, args.out, gnuplot=args.gnuplot)
    record = {"report": str(path), "rows": len(results)}
    table = tuning.render_report(results).replace("\t", "  ")
    _emit(args.format, record, table + f"{len(results)} rows -> {path}")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help=f"INI file (default: ${CONFIG_ENV})")
    common.add_argument("--seed", type=int, help="random seed for every stochastic step")
    common.add_argument("--workers", type=int, help="upper bound on worker threads")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING or ERROR")
    out = common.add_mutually_exclusive_group()
    out.add_argument("--format", choices=("table", "kv", "json"), default="table")
    out.add_argument("--json", dest="format", action="store_const", const="json")
    out.add_argument("--kv", dest="format", action="store_const", const="kv")

    training = argparse.ArgumentParser(add_help=False)
    training.add_argument("--epochs", type=int)
    training.add_argument("--vector-size", type=int)
    training.add_argument("--sample-count", type=int)

    p = argparse.ArgumentParser(prog="tpldetect", description=__doc__.splitlines()[0],
                                formatter_class=argparse.RawDescriptionHelpFormatter,
                                epilog="\n".join(__doc__.splitlines()[2:]))
    sub = p.add_subparsers(dest="command", required=True)

    for name in ("ingest", "fetch"):
        s = sub.add_parser(name, parents=[common], help="build a corpus manifest from a catalog")
        s.add_argument("catalog", help="tab-separated catalog: location [name version category stars]")
        s.add_argument("--out", required=True, help="manifest to write")
        s.add_argument("--dest", help="download directory for remote entries")
        s.set_defaults(func=cmd_ingest)

    s = sub.add_parser("train", parents=[common, training], help="train one model per channel")
    s.add_argument("inputs", nargs="*", help="archives or manifests")
    s.add_argument("--out", help="model directory")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("index", parents=[common], help="build the reference index")
    s.add_argument("inputs", nargs="*", help="archives or manifests")
    s.add_argument("--models", dest="models_dir")
    s.add_argument("--out", help="index directory")
    s.add_argument("--verify", action="store_true", help="reload and compare 100 queries")
    s.set_defaults(func=cmd_index)

    s = sub.add_parser("check", parents=[common], help="classify one archive")
    s.add_argument("archive")
    s.add_argument("--models", dest="models_dir")
    s.add_argument("--index", dest="index_dir")
    s.add_argument("--k", type=int, help="number of similar libraries to list (default 5)")
    s.add_argument("--majority-fraction", type=float)
    s.add_argument("--required-channels", choices=[m.value for m in RequiredChannels])
    s.add_argument("--per-file", action="store_true", help="include per-file scores")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("tune", parents=[common, training], help="parameter sweep report")
    s.add_argument("inputs", nargs="*", help="archives or manifests")
    s.add_argument("--axis", required=True, choices=[a.value for a in tuning.Axis])
    s.add_argument("--grid", help="comma-separated values instead of the default grid")
    s.add_argument("--step", type=int, default=5000, help="sample-count grid step")
    s.add_argument("--transform", choices=[t.value for t in TransformKind])
    s.add_argument("--rate", type=float, default=0.2, help="statement-insert rate")
    s.add_argument("--pairs", type=int, help="pairs per channel (default: one per test file)")
    s.add_argument("--mode", choices=[m.value for m in tuning.ThresholdMode], default="midpoint")
    s.add_argument("--channel", choices=[c.value for c in Channel])
    s.add_argument("--out", required=True, help="report file (TSV)")
    s.add_argument("--gnuplot", action="store_true", help="also write <out>.dat")
    s.set_defaults(func=cmd_tune)
    return p


def _run_config(args) -> RunConfig:
    cfg = load_config(args.config)
    flags = {
        "epochs": getattr(args, "epochs", None),
        "vector_size": getattr(args, "vector_size", None),
        "sample_count": getattr(args, "sample_count", None),
        "seed": args.seed,
        "workers": args.workers,
        "k": getattr(args, "k", None),
        "majority_fraction": getattr(args, "majority_fraction", None),
        "required_channels": getattr(args, "required_channels", None),
    }
    for name in ("models_dir", "index_dir"):
        value = getattr(args, name, None)
        flags[name] = Path(value) if value else None
    return override(cfg, **flags)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _run_config(args)
    except (TPLDetectError, ValueError) as exc:
        print(f"tpldetect: {exc}", file=sys.stderr)
        return EXIT_ERROR
    logging.basicConfig(level=(args.log_level or cfg.log_level).upper(), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, cfg)
    except EmptyCorpus as exc:
        log.error("%s", exc)
        return EXIT_EMPTY
    except DuplicateLibrary as exc:
        log.error("%s", exc)
        return EXIT_DUPLICATE
    except (TPLDetectError, OSError, ValueError) as exc:
        log.error("%s", exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

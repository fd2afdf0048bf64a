import csv
import json
import shutil
import struct

import pytest

from tpldetect import synth
from tpldetect.cli import main

from conftest import make_zip


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def built(small_desk, tmp_path_factory):
    """Models and an index built through the command line once per module."""
    root = tmp_path_factory.mktemp("cli")
    refs = [str(p) for p in small_desk.reference]
    assert main(["train", *refs, "--out", str(root / "models")]) == 0
    assert main(["index", *refs, "--models", str(root / "models"), "--out", str(root / "index")]) == 0
    return root


# -- ingest ----------------------------------------------------------------------


def python_lib(tmp_path, name, kb):
    body = ("x = 1  # padding\n" * (kb * 1024 // 17 + 1)).encode()
    return synth.write_archive(tmp_path / f"{name}.zip", {f"{name}/core.py": body})


def test_ingest_accepts_and_rejects(tmp_path, capsys):
    for name in ("alpha", "beta", "gamma"):
        python_lib(tmp_path, name, 12)
    python_lib(tmp_path, "tiny", 8)
    (tmp_path / "catalog.tsv").write_text(
        "alpha.zip\tAlpha\t1.0\tweb\t10\nbeta.zip\ngamma.zip\tGamma\t2\tcli\t3\ntiny.zip\n")
    code, out, _ = run(capsys, "ingest", tmp_path / "catalog.tsv", "--out",
                       tmp_path / "manifest.tsv", "--json")
    assert code == 0
    assert json.loads(out) == {"manifest": str(tmp_path / "manifest.tsv"), "accepted": 3,
                               "rejected": 1}
    with open(tmp_path / "manifest.tsv", newline="") as fh:
        rows = {r["archive_id"]: r for r in csv.DictReader(fh, delimiter="\t")}
    assert rows["tiny"]["status"] == "rejected" and rows["tiny"]["reason"] == "SizeConstraint"
    assert rows["alpha"]["name"] == "Alpha" and rows["alpha"]["star_count"] == "10"


def test_ingest_missing_catalog(tmp_path, capsys, caplog):
    code, _, _ = run(capsys, "ingest", tmp_path / "none.tsv", "--out", tmp_path / "m.tsv")
    assert code == 2 and "not found" in caplog.text


def test_manifest_feeds_train(tmp_path, capsys):
    for name in ("alpha", "beta"):
        python_lib(tmp_path, name, 12)
    (tmp_path / "catalog.tsv").write_text("alpha.zip\nbeta.zip\n")
    run(capsys, "ingest", tmp_path / "catalog.tsv", "--out", tmp_path / "manifest.tsv")
    code, out, _ = run(capsys, "train", tmp_path / "manifest.tsv", "--out", tmp_path / "m",
                       "--epochs", 2, "--kv")
    assert code == 0 and "models.1.docs=2" in out.splitlines()


# -- train -----------------------------------------------------------------------


def header(path):
    return struct.unpack_from("<II", path.read_bytes(), 10)


def test_train_defaults_recorded(built):
    assert sorted(p.name for p in (built / "models").iterdir()) == ["java-bytecode.l2vm",
                                                                   "python-source.l2vm"]
    assert header(built / "models/java-bytecode.l2vm") == (10, 10)


def test_train_epoch_flag(small_desk, tmp_path, capsys):
    code, _, _ = run(capsys, "train", small_desk.java[0], "--epochs", 5, "--out", tmp_path)
    assert code == 0 and header(tmp_path / "java-bytecode.l2vm") == (5, 10)


def test_train_empty_corpus(tmp_path, capsys):
    path = tmp_path / "small.zip"
    path.write_bytes(make_zip({"a.py": b"x = 1\n"}))
    code, _, _ = run(capsys, "train", path, "--out", tmp_path / "m")
    assert code == 3


def test_train_missing_input(tmp_path, capsys):
    assert run(capsys, "train", tmp_path / "gone.zip", "--out", tmp_path)[0] == 2


# -- index -----------------------------------------------------------------------


def test_index_catalog_rows(small_desk, built, tmp_path, capsys):
    code, out, _ = run(capsys, "index", small_desk.java[0], small_desk.java[1],
                       "--models", built / "models", "--out", tmp_path / "idx", "--verify", "--json")
    assert code == 0
    record = json.loads(out)
    assert record["libraries"] == 2 and record["verify"] == "pass"
    assert len((tmp_path / "idx/catalog.tsv").read_text().strip().splitlines()) == 2


def test_index_duplicate_id(small_desk, built, tmp_path, capsys, caplog):
    twin = tmp_path / "twin"
    twin.mkdir()
    copy = shutil.copy(small_desk.java[0], twin)
    code, _, _ = run(capsys, "index", small_desk.java[0], copy, "--models", built / "models",
                     "--out", tmp_path / "idx")
    assert code == 4 and small_desk.java[0].stem in caplog.text


def test_index_without_models(small_desk, tmp_path, capsys):
    code, _, _ = run(capsys, "index", small_desk.java[0], "--models", tmp_path, "--out",
                     tmp_path / "idx")
    assert code == 2


# -- check -----------------------------------------------------------------------


def test_check_copy_is_relevant(small_desk, built, capsys):
    code, out, _ = run(capsys, "check", small_desk.python[0], "--models", built / "models",
                       "--index", built / "index", "--json", "--per-file")
    assert code == 0
    record = json.loads(out)
    assert record["label"] == "relevant"
    assert 1 <= len(record["similar"]) <= 5
    assert record["similar"][0]["library"] == small_desk.python[0].stem
    assert all(f["source"] == 1.0 for f in record["per_file"])


def test_check_foreign_is_irrelevant(small_desk, built, capsys):
    code, out, _ = run(capsys, "check", small_desk.foreign_java[0], "--models", built / "models",
                       "--index", built / "index")
    assert code == 1
    assert "label     irrelevant" in out


def test_check_kv_format(small_desk, built, capsys):
    code, out, _ = run(capsys, "check", small_desk.java[1], "--models", built / "models",
                       "--index", built / "index", "--kv", "--k", 2)
    keys = dict(line.split("=", 1) for line in out.splitlines())
    assert code == 0 and keys["label"] == "relevant"
    assert "matched.bytecode" in keys and "similar.3.library" not in keys


def test_check_needs_index(small_desk, built, capsys):
    assert run(capsys, "check", small_desk.java[0], "--models", built / "models")[0] == 2


# -- tune ------------------------------------------------------------------------


def test_tune_epoch_axis(small_desk, tmp_path, capsys):
    refs = small_desk.java
    args = ["tune", *refs, "--axis", "epochs", "--channel", "bytecode", "--seed", 3]
    code, _, _ = run(capsys, *args, "--out", tmp_path / "a.tsv", "--gnuplot")
    assert code == 0
    lines = (tmp_path / "a.tsv").read_text().splitlines()
    assert len(lines) == 11
    assert [l.split("\t")[1] for l in lines[1:]] == [str(v) for v in range(5, 51, 5)]
    run(capsys, *args, "--out", tmp_path / "b.tsv")
    assert (tmp_path / "a.tsv").read_bytes() == (tmp_path / "b.tsv").read_bytes()
    assert (tmp_path / "a.dat").exists()


def test_tune_package_rename(small_desk, tmp_path, capsys):
    code, _, _ = run(capsys, "tune", *small_desk.java, "--axis", "vector_size", "--grid", "10",
                     "--transform", "package-rename", "--out", tmp_path / "r.tsv")
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "r.tsv"), delimiter="\t"))
    assert len(rows) == 1 and rows[0]["transform"] == "package-rename"
    assert float(rows[0]["recall"]) == 1.0

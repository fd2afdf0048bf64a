import io
import tarfile
import zipfile

import hypothesis
import numpy as np
import pytest

from tpldetect import synth
from tpldetect.classgen import ClassBuilder

hypothesis.settings.register_profile("ci", deadline=None, max_examples=60)
hypothesis.settings.register_profile("fast", deadline=None, max_examples=10)
hypothesis.settings.load_profile("ci")


def one_method_class(name="com/acme/One"):
    """The fixture class ``int one() { return 1; }`` with no fields."""
    b = ClassBuilder(name)
    b.add_method("one", "()I", [("iconst_1",), ("ireturn",)])
    return b.to_bytes()


def rich_class(name="com/acme/Widget", other="com/acme/Helper"):
    """A class touching every kind of pool entry the disassembler renders."""
    b = ClassBuilder(name)
    b.add_interface("com/acme/Api")
    b.add_field("count", "I")
    b.add_field("label", "Ljava/lang/String;")
    b.add_method("run", "(I)I", [
        ("label", "top"),
        ("iload_1",), ("ifeq", "out"),
        ("aload_0",), ("getfield", (name, "count", "I")),
        ("ldc", ("str", "com/acme/Widget")),
        ("invokevirtual", (other, "apply", "(Ljava/lang/String;)I")),
        ("pop",), ("iinc", 1, -1), ("goto", "top"),
        ("label", "out"),
        ("new", other), ("dup",),
        ("invokespecial", (other, "<init>", "()V")),
        ("checkcast", f"{other}"),
        ("pop",),
        ("ldc2_w", ("long", 7)), ("l2i",), ("ireturn",),
    ])
    b.add_method("make", "()Lcom/acme/Helper;", [("aconst_null",), ("areturn",)])
    return b.to_bytes()


def make_zip(files):
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        for name, data in files.items():
            zf.writestr(name, data)
    return buf.getvalue()


def make_tar(files):
    buf = io.BytesIO()
    with tarfile.open(fileobj=buf, mode="w:gz") as tf:
        for name, data in files.items():
            info = tarfile.TarInfo(name)
            info.size = len(data)
            tf.addfile(info, io.BytesIO(data))
    return buf.getvalue()


@pytest.fixture(scope="session")
def small_desk(tmp_path_factory):
    """Four libraries per language, one foreign library each."""
    root = tmp_path_factory.mktemp("small_desk")
    return synth.build_desk_corpus(root, n_java=4, n_python=4, n_foreign=1, seed=11)


@pytest.fixture(scope="session")
def small_models(small_desk):
    from tpldetect import tune
    from tpldetect.embed import TrainingConfig, train
    from tpldetect.ingest import open_archive

    archives = [open_archive(p) for p in small_desk.reference]
    corpora = tune.build_corpora(archives)
    return {(c.language, c.channel): train(c.docs, TrainingConfig(), c.channel, c.language)
            for c in corpora}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# -- acceptance report ----------------------------------------------------------

_CRITERIA = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_CRITERIA] = {}


@pytest.fixture
def criterion(request):
    """``criterion(n, part, ok, detail)`` records one checked part of criterion n."""
    store = request.config.stash[_CRITERIA]

    def record(number, part, ok, detail=""):
        store.setdefault(number, []).append((part, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    store = config.stash.get(_CRITERIA, {})
    if not store:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(store):
        parts = store[number]
        status = "PASS" if all(ok for _, ok, _ in parts) else "FAIL"
        details = "; ".join(f"{part}{'' if ok else ' [FAIL]'}: {detail}"
                            for part, ok, detail in parts)
        terminalreporter.write_line(f"criterion {number}: {status}  {details}")

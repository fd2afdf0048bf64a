import textwrap

import pytest

from tpldetect.config import CONFIG_ENV, ConfigError, RunConfig, load_config, override
from tpldetect.core import Channel, Language
from tpldetect.detect import ALPHA_BC, RequiredChannels

FULL = """
[paths]
corpus = corpus/a.zip corpus/b.zip
index = build/index
models = build/models

[models]
java.bytecode = /opt/models/custom.l2vm

[detection]
k = 3
majority_fraction = 0.6
required_channels = any
threshold.python.source = 0.9   ; looser than the default
rank_threshold.java.bytecode = 0.8

[training]
epochs = 20
sample_count = ALL

[adapters]
java.source = decompile {input}

[logging]
level = info
"""


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return p


def test_defaults_without_file(monkeypatch):
    monkeypatch.delenv(CONFIG_ENV, raising=False)
    cfg = load_config()
    assert cfg == RunConfig()
    assert cfg.model_path(Language.JAVA, Channel.BYTECODE) is None


def test_full_file(tmp_path):
    cfg = load_config(write(tmp_path, FULL))
    assert cfg.corpus == (tmp_path / "corpus/a.zip", tmp_path / "corpus/b.zip")
    assert cfg.index_dir == tmp_path / "build/index"
    assert cfg.model_path(Language.JAVA, Channel.BYTECODE).as_posix() == "/opt/models/custom.l2vm"
    assert cfg.model_path(Language.PYTHON, Channel.SOURCE) == tmp_path / "build/models/python-source.l2vm"
    d = cfg.detection
    assert (d.k, d.majority_fraction, d.required_channels) == (3, 0.6, RequiredChannels.ANY)
    assert d.threshold(Language.PYTHON, Channel.SOURCE) == 0.9
    assert d.threshold(Language.JAVA, Channel.BYTECODE) == ALPHA_BC
    assert cfg.training.epochs == 20 and cfg.training.sample_count is None
    assert cfg.adapters == {(Language.JAVA, Channel.SOURCE): "decompile {input}"}
    assert cfg.log_level == "INFO"


def test_environment_variable(tmp_path, monkeypatch):
    monkeypatch.setenv(CONFIG_ENV, str(write(tmp_path, "[training]\nepochs = 7\n")))
    assert load_config().training.epochs == 7


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.ini")


@pytest.mark.parametrize("text", [
    "[training]\nepochz = 3\n",
    "[training]\nepochs = many\n",
    "[detection]\nthreshold.cobol.source = 0.5\n",
    "[detection]\nk = 0\n",
    "not an ini file",
])
def test_bad_files(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(write(tmp_path, text))


def test_override_routes_flags(tmp_path):
    cfg = load_config(write(tmp_path, FULL))
    out = override(cfg, epochs=5, seed=9, k=2, log_level="DEBUG", vector_size=None)
    assert out.training.epochs == 5 and out.training.seed == 9
    assert out.training.vector_size == cfg.training.vector_size
    assert out.detection.k == 2 and out.detection.majority_fraction == 0.6
    assert out.log_level == "DEBUG"
    assert override(cfg) == cfg


def test_override_validation():
    with pytest.raises(ConfigError):
        override(RunConfig(), epochs=0)


def test_check_paths(tmp_path):
    cfg = load_config(write(tmp_path, FULL))
    with pytest.raises(ConfigError):
        cfg.check_paths("index_dir")
    (tmp_path / "build/index").mkdir(parents=True)
    cfg.check_paths("index_dir")
    with pytest.raises(ConfigError):
        RunConfig().check_paths("corpus")

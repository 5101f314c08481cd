"""Run-configuration grammar."""

import pytest

from ftaug.config import parse_config, read_config

GOOD = """
# run settings
seed = 11
out = /tmp/somewhere
workers = 2

[dataset]
kind = synthetic
n_classes = 4
samples_per_class = 6
image_size = 32
noise_level = 0.5
protocol = kfold
k = 3

[app]
id = 3

[app]
id = 12
p = 0.3

[app]
id = 14
cutoff = 20

[ensemble]
name = EnsA
members = app3-run1, app12-run1

[ensemble]
name = Solo
members = app3-run1
rule = average
"""


def test_parse_full_config():
    cfg = parse_config(GOOD)
    assert cfg.seed == 11
    assert cfg.out == "/tmp/somewhere"
    assert cfg.workers == 2
    assert cfg.dataset.kind == "synthetic"
    assert cfg.dataset.n_classes == 4
    assert cfg.dataset.noise_level == 0.5
    assert cfg.dataset.protocol == "kfold"
    assert cfg.dataset.k == 3
    assert [a.app_id for a in cfg.apps] == [3, 12, 14]
    assert cfg.apps[1].params == {"p": 0.3}
    assert cfg.apps[2].params == {"cutoff": 20}
    assert [e.name for e in cfg.ensembles] == ["EnsA", "Solo"]
    assert cfg.ensembles[0].member_tags == ["app3-run1", "app12-run1"]
    assert cfg.ensembles[1].rule == "average"


def test_defaults_from_empty_config():
    cfg = parse_config("")
    assert cfg.seed == 0
    assert cfg.dataset.kind == "synthetic"
    assert cfg.dataset.protocol == "train_test"
    assert cfg.apps == [] and cfg.ensembles == []


def test_comments_and_blanks_ignored():
    cfg = parse_config("# hello\n\nseed = 3\n   \n# more\n")
    assert cfg.seed == 3


def test_unknown_key_reports_line():
    with pytest.raises(ValueError, match="line 2"):
        parse_config("seed = 1\nbanana = 2\n")


def test_unknown_section_rejected():
    with pytest.raises(ValueError, match="mystery"):
        parse_config("[mystery]\n")


def test_duplicate_dataset_rejected():
    with pytest.raises(ValueError, match="dataset"):
        parse_config("[dataset]\nkind = synthetic\n[dataset]\nkind = synthetic\n")


def test_duplicate_key_rejected():
    with pytest.raises(ValueError, match="duplicate"):
        parse_config("seed = 1\nseed = 2\n")


def test_bad_value_rejected():
    with pytest.raises(ValueError, match="seed"):
        parse_config("seed = soon\n")


def test_app_block_requires_known_id():
    with pytest.raises(ValueError, match="needs an id"):
        parse_config("[app]\np = 0.5\n")
    with pytest.raises(ValueError, match="app id"):
        parse_config("[app]\nid = 99\n")


def test_ensemble_block_requires_name_and_members():
    with pytest.raises(ValueError):
        parse_config("[ensemble]\nname = X\n")


def test_missing_equals_rejected():
    with pytest.raises(ValueError, match="key = value"):
        parse_config("seed 5\n")


def test_directory_dataset_requires_root():
    with pytest.raises(ValueError, match="root"):
        parse_config("[dataset]\nkind = directory\n")


def test_read_config_file(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(GOOD)
    cfg = read_config(str(path))
    assert cfg.seed == 11

"""Dataset scanning, splits, companion sampling, and export."""

import os

import numpy as np
import pytest

from ftaug.augment import AugmentationSpec
from ftaug.data import (
    DatasetManifest,
    Sample,
    SyntheticSpec,
    assign_train_test,
    dataset_is_grayscale,
    export_augmented,
    fit_pca_basis,
    make_synthetic,
    read_manifest,
    sample_companions,
    scan_directory,
    stratified_folds,
    write_manifest,
)
from ftaug.image import as_image, load_image, save_image, to_gray


def make_tree(root, per_class, classes=("alpha", "beta"), size=24, color=True):
    rng = np.random.default_rng(123)
    for label, cname in enumerate(classes):
        os.makedirs(os.path.join(root, cname), exist_ok=True)
        for i in range(per_class):
            img = rng.uniform(0.2, 0.8, (size, size, 3 if color else 1))
            save_image(img, os.path.join(root, cname, f"img{i:02d}.png"))


# ---------------------------------------------------------------------------
# Scanning
# ---------------------------------------------------------------------------

def test_scan_two_classes(tmp_path):
    make_tree(tmp_path, 3)
    m = scan_directory(str(tmp_path))
    assert m.classes == ["alpha", "beta"]
    assert len(m.samples) == 6
    assert [s.id for s in m.samples] == sorted(s.id for s in m.samples)
    assert all(s.origin == "original" for s in m.samples)
    assert [s.label for s in m.samples] == [0, 0, 0, 1, 1, 1]


def test_scan_is_idempotent(tmp_path):
    make_tree(tmp_path, 4)
    a = scan_directory(str(tmp_path))
    b = scan_directory(str(tmp_path))
    assert [(s.id, s.label, s.path) for s in a.samples] == \
        [(s.id, s.label, s.path) for s in b.samples]


def test_scan_single_class_rejected(tmp_path):
    make_tree(tmp_path, 3, classes=("only",))
    with pytest.raises(ValueError):
        scan_directory(str(tmp_path))


def test_scan_skips_unreadable_with_note(tmp_path):
    make_tree(tmp_path, 2)
    bogus = os.path.join(tmp_path, "alpha", "broken.png")
    with open(bogus, "w") as fh:
        fh.write("not an image")
    m = scan_directory(str(tmp_path))
    assert len(m.samples) == 4
    assert any("broken.png" in n for n in m.notes)


def test_scan_loads_images(tmp_path):
    make_tree(tmp_path, 2, size=20)
    m = scan_directory(str(tmp_path))
    img = m.load(m.samples[0])
    assert img.shape == (20, 20, 3)
    assert img.min() >= 0.0 and img.max() <= 1.0


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------

def test_stratified_fold_sizes():
    m = make_synthetic(SyntheticSpec(n_classes=2, samples_per_class=7, seed=1))
    split = stratified_folds(m, 5, seed=9)
    for label in range(2):
        sizes = sorted(
            sum(1 for s in split.samples if s.label == label and s.fold == f)
            for f in range(5))
        assert sizes == [1, 1, 1, 2, 2]


def test_stratified_folds_partition():
    m = make_synthetic(SyntheticSpec(n_classes=3, samples_per_class=10, seed=2))
    split = stratified_folds(m, 4, seed=3)
    assert split.protocol == "kfold:4"
    assert all(0 <= s.fold < 4 for s in split.samples)
    assert {s.id for s in split.samples} == {s.id for s in m.samples}


def test_stratified_folds_deterministic():
    m = make_synthetic(SyntheticSpec(n_classes=2, samples_per_class=9, seed=4))
    a = stratified_folds(m, 3, seed=11)
    b = stratified_folds(m, 3, seed=11)
    assert [(s.id, s.fold) for s in a.samples] == [(s.id, s.fold) for s in b.samples]
    c = stratified_folds(m, 3, seed=12)
    assert [(s.id, s.fold) for s in a.samples] != [(s.id, s.fold) for s in c.samples]


def test_stratified_folds_small_class_rejected():
    m = make_synthetic(SyntheticSpec(n_classes=2, samples_per_class=3, seed=5))
    with pytest.raises(ValueError, match="class0"):
        stratified_folds(m, 5, seed=0)


def test_train_test_split_counts():
    m = make_synthetic(SyntheticSpec(n_classes=2, samples_per_class=8, seed=6))
    split = assign_train_test(m, 0.25, seed=7)
    assert split.protocol == "train_test"
    for label in range(2):
        folds = [s.fold for s in split.samples if s.label == label]
        assert folds.count(1) == 2 and folds.count(0) == 6


# ---------------------------------------------------------------------------
# Companion sampling
# ---------------------------------------------------------------------------

def fold_zero_manifest(per_class=8, n_classes=3):
    m = make_synthetic(SyntheticSpec(n_classes=n_classes, samples_per_class=per_class, seed=8))
    return assign_train_test(m, 0.25, seed=8)


def test_companions_exclude_self_and_stay_in_fold():
    m = fold_zero_manifest()
    anchor = next(s for s in m.samples if s.fold == 0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        picks = sample_companions(m, anchor, 3, 2, rng)
        assert len(picks) == 5
        assert all(p.id != anchor.id for p in picks)
        assert all(p.fold == anchor.fold for p in picks)
        assert all(p.label == anchor.label for p in picks[:3])
        assert all(p.label != anchor.label for p in picks[3:])
        assert len({p.id for p in picks}) == 5


def test_companions_insufficient_names_class():
    m = make_synthetic(SyntheticSpec(n_classes=2, samples_per_class=4, seed=9))
    anchor = m.samples[0]
    rng = np.random.default_rng(0)
    with pytest.raises(ValueError, match="class0"):
        sample_companions(m, anchor, 5, 0, rng)


def test_companions_deterministic_under_same_rng_state():
    m = fold_zero_manifest()
    anchor = next(s for s in m.samples if s.fold == 0)
    a = sample_companions(m, anchor, 3, 2, np.random.default_rng(42))
    b = sample_companions(m, anchor, 3, 2, np.random.default_rng(42))
    assert [p.id for p in a] == [p.id for p in b]


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------

def test_synthetic_shapes_and_determinism():
    spec = SyntheticSpec(n_classes=3, samples_per_class=4, image_size=32, seed=10)
    a = make_synthetic(spec)
    b = make_synthetic(spec)
    assert len(a.samples) == 12
    for s in a.samples:
        img = a.load(s)
        assert img.shape == (32, 32, 3)
        assert np.array_equal(img, b.load(s))


def test_synthetic_zero_noise_identical_within_class():
    m = make_synthetic(SyntheticSpec(n_classes=2, samples_per_class=3,
                                     noise_level=0.0, seed=11))
    for label in range(2):
        imgs = [m.load(s) for s in m.samples if s.label == label]
        for img in imgs[1:]:
            assert np.array_equal(img, imgs[0])


def test_synthetic_classes_separable():
    m = make_synthetic(SyntheticSpec(n_classes=3, samples_per_class=5,
                                     noise_level=0.02, seed=12))
    means = [np.mean([m.load(s) for s in m.samples if s.label == c], axis=0)
             for c in range(3)]
    for i in range(3):
        for j in range(i + 1, 3):
            gap = float(np.abs(means[i] - means[j]).mean())
            assert gap > 0.01


def test_synthetic_validation():
    with pytest.raises(ValueError):
        SyntheticSpec(n_classes=1)
    with pytest.raises(ValueError):
        SyntheticSpec(image_size=8)
    with pytest.raises(ValueError):
        SyntheticSpec(noise_level=-0.1)


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def test_export_app1_counts_and_provenance(tmp_path):
    m = make_synthetic(SyntheticSpec(n_classes=2, samples_per_class=5,
                                     image_size=24, seed=13))
    out = export_augmented(m, [AugmentationSpec(1)], str(tmp_path / "out"), seed=21)
    originals = [s for s in out.samples if s.origin == "original"]
    augmented = [s for s in out.samples if s.origin == "app1"]
    assert len(originals) == 10
    assert len(augmented) == 30
    by_id = {s.id: s for s in out.samples}
    for s in augmented:
        parent = by_id[s.parent_id]
        assert parent.origin == "original"
        assert parent.label == s.label
        assert parent.fold == s.fold
        img = load_image(os.path.join(out.root, s.path))
        assert img.shape == (24, 24, 3)
    assert os.path.exists(tmp_path / "out" / "manifest.tsv")


def test_export_companion_app_respects_fold(tmp_path):
    m = make_synthetic(SyntheticSpec(n_classes=3, samples_per_class=8,
                                     image_size=20, seed=14))
    split = assign_train_test(m, 0.25, seed=14)
    out = export_augmented(split, [AugmentationSpec(12)], str(tmp_path / "out"), seed=22)
    augmented = [s for s in out.samples if s.origin == "app12"]
    assert len(augmented) == 18 * 5  # 6 train per class x 3 classes x 5 outputs
    test_ids = {s.id for s in split.samples if s.fold == 1}
    assert all(s.parent_id not in test_ids for s in augmented)
    assert all(s.fold == 0 for s in augmented)


def test_export_never_augments_test_split(tmp_path):
    m = make_synthetic(SyntheticSpec(n_classes=2, samples_per_class=8,
                                     image_size=20, seed=15))
    split = assign_train_test(m, 0.25, seed=15)
    out = export_augmented(split, [AugmentationSpec(1)], str(tmp_path / "out"), seed=23)
    augmented = [s for s in out.samples if s.origin != "original"]
    assert len(augmented) == 12 * 3
    parents = {s.parent_id for s in augmented}
    assert all(split.by_id(p).fold == 0 for p in parents)


def test_export_empty_spec_list_is_originals_only(tmp_path):
    m = make_synthetic(SyntheticSpec(n_classes=2, samples_per_class=3,
                                     image_size=20, seed=16))
    out = export_augmented(m, [], str(tmp_path / "out"), seed=24)
    assert len(out.samples) == 6
    assert all(s.origin == "original" for s in out.samples)


def test_export_skips_color_only_on_grayscale(tmp_path):
    m = make_synthetic(SyntheticSpec(n_classes=2, samples_per_class=4,
                                     image_size=20, seed=17))
    gray_images = {sid: as_image(to_gray(img)) for sid, img in m.images.items()}
    gm = DatasetManifest(m.samples, m.classes, images=gray_images)
    assert dataset_is_grayscale(gm)
    out = export_augmented(gm, [AugmentationSpec(7), AugmentationSpec(1)],
                           str(tmp_path / "out"), seed=25)
    assert not any(s.origin == "app7" for s in out.samples)
    assert any(s.origin == "app1" for s in out.samples)
    assert any("app7" in n and "grayscale" in n for n in out.notes)


def test_grayscale_detection_identical_channels():
    m = make_synthetic(SyntheticSpec(n_classes=2, samples_per_class=2,
                                     image_size=20, seed=18))
    stacked = {sid: np.repeat(as_image(to_gray(img)), 3, axis=2)
               for sid, img in m.images.items()}
    gm = DatasetManifest(m.samples, m.classes, images=stacked)
    assert dataset_is_grayscale(gm)
    assert not dataset_is_grayscale(m)


def test_export_is_deterministic_across_runs_and_workers(tmp_path):
    m = make_synthetic(SyntheticSpec(n_classes=2, samples_per_class=6,
                                     image_size=20, seed=19))
    a = export_augmented(m, [AugmentationSpec(3), AugmentationSpec(12)],
                         str(tmp_path / "a"), seed=26, max_workers=4)
    b = export_augmented(m, [AugmentationSpec(3), AugmentationSpec(12)],
                         str(tmp_path / "b"), seed=26, max_workers=1)
    with open(tmp_path / "a" / "manifest.tsv", "rb") as fh:
        ma = fh.read()
    with open(tmp_path / "b" / "manifest.tsv", "rb") as fh:
        mb = fh.read()
    assert ma == mb
    for s in a.samples:
        with open(os.path.join(a.root, s.path), "rb") as fh:
            pa = fh.read()
        with open(os.path.join(b.root, s.path), "rb") as fh:
            pb = fh.read()
        assert pa == pb, s.id


def test_export_app4_fits_basis_automatically(tmp_path):
    m = make_synthetic(SyntheticSpec(n_classes=2, samples_per_class=6,
                                     image_size=20, seed=20))
    out = export_augmented(m, [AugmentationSpec(4)], str(tmp_path / "out"), seed=27)
    assert sum(1 for s in out.samples if s.origin == "app4") == 12 * 3


# ---------------------------------------------------------------------------
# Manifest IO
# ---------------------------------------------------------------------------

def test_manifest_round_trip(tmp_path):
    m = make_synthetic(SyntheticSpec(n_classes=2, samples_per_class=5,
                                     image_size=20, seed=28))
    split = assign_train_test(m, 0.25, seed=28)
    out = export_augmented(split, [AugmentationSpec(1)], str(tmp_path / "out"), seed=28)
    back = read_manifest(os.path.join(out.root, "manifest.tsv"))
    assert back.classes == out.classes
    assert back.protocol == out.protocol
    assert [(s.id, s.path, s.label, s.origin, s.parent_id, s.fold) for s in back.samples] == \
        [(s.id, s.path, s.label, s.origin, s.parent_id, s.fold) for s in out.samples]
    img = back.load(back.samples[0])
    assert img.shape == (20, 20, 3)


def test_manifest_rejects_malformed(tmp_path):
    path = tmp_path / "bad.tsv"
    with open(path, "w") as fh:
        fh.write("# classes: a,b\nid1\tp.png\t0\n")
    with pytest.raises(ValueError):
        read_manifest(str(path))


def test_manifest_requires_classes_header(tmp_path):
    path = tmp_path / "bad.tsv"
    with open(path, "w") as fh:
        fh.write("a/x.png\ta/x.png\t0\toriginal\t-\t-1\n")
    with pytest.raises(ValueError):
        read_manifest(str(path))


def test_manifest_duplicate_ids_rejected():
    s = [Sample("x", None, 0), Sample("x", None, 1)]
    with pytest.raises(ValueError):
        DatasetManifest(s, ["a", "b"])


def test_write_manifest_format(tmp_path):
    m = make_synthetic(SyntheticSpec(n_classes=2, samples_per_class=2,
                                     image_size=20, seed=29))
    path = tmp_path / "m.tsv"
    write_manifest(m, str(path))
    with open(path) as fh:
        lines = fh.read().splitlines()
    assert lines[0] == "# classes: class0,class1"
    assert lines[1] == "# protocol: unsplit"
    row = lines[2].split("\t")
    assert len(row) == 6
    assert row[3] == "original" and row[4] == "-" and row[5] == "-1"


# ---------------------------------------------------------------------------
# PCA basis helper
# ---------------------------------------------------------------------------

def test_fit_pca_basis_shapes_and_determinism():
    m = make_synthetic(SyntheticSpec(n_classes=2, samples_per_class=6,
                                     image_size=20, seed=30))
    a = fit_pca_basis(m, seed=5, k=8)
    b = fit_pca_basis(m, seed=5, k=8)
    assert a.components.shape == (8, 400)
    assert np.array_equal(a.components, b.components)
    assert np.array_equal(a.mean, b.mean)


def test_fit_pca_basis_caps_k():
    m = make_synthetic(SyntheticSpec(n_classes=2, samples_per_class=3,
                                     image_size=20, seed=31))
    basis = fit_pca_basis(m, seed=6, k=64)
    assert basis.components.shape[0] == 5  # 6 images -> at most M-1

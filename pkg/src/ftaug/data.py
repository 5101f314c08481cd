"""Dataset ingestion, splits, companion sampling, and augmented export.

A manifest is the unit of exchange: a list of samples (originals and
augmented derivatives), the class names, and the split protocol. On disk
it is a UTF-8 TSV, one record per line::

    id<TAB>relative_path<TAB>label<TAB>origin<TAB>parent_id<TAB>fold

preceded by ``# key: value`` metadata lines (classes, protocol, notes).
``origin`` is "original" or "appN" for augmented samples; missing values
are "-". Fold semantics: under "kfold:K" folds are 0..K-1 and rotation r
tests on fold r; under "train_test" fold 0 is train and fold 1 is test;
-1 means unassigned.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .augment import COLOR_ONLY, AugmentationSpec, apply_app
from .image import as_image, load_image, resize_bilinear, save_image, to_gray
from .spectral import PcaBasis, pca_fit

__all__ = [
    "DatasetManifest",
    "Sample",
    "SyntheticSpec",
    "assign_train_test",
    "export_augmented",
    "fit_pca_basis",
    "make_synthetic",
    "read_manifest",
    "sample_companions",
    "scan_directory",
    "stratified_folds",
    "write_manifest",
]

MISSING = "-"


@dataclass
class Sample:
    id: str
    path: str | None
    label: int
    origin: str = "original"  # "original" or "appN"
    parent_id: str | None = None
    fold: int = -1
    group: str | None = None  # optional view-group for grouped evaluation


@dataclass
class DatasetManifest:
    samples: list[Sample]
    classes: list[str]
    protocol: str = "unsplit"  # "unsplit" | "kfold:K" | "train_test"
    root: str | None = None
    images: dict = field(default_factory=dict)  # id -> in-memory array
    notes: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.classes:
            raise ValueError("manifest needs at least one class")
        counts = [0] * len(self.classes)
        for s in self.samples:
            if not 0 <= s.label < len(self.classes):
                raise ValueError(f"sample {s.id}: label {s.label} out of range")
            if s.origin == "original":
                counts[s.label] += 1
        if self.samples and min(counts) == 0:
            empty = self.classes[counts.index(0)]
            raise ValueError(f"class {empty!r} has no original samples")
        ids = [s.id for s in self.samples]
        if len(set(ids)) != len(ids):
            raise ValueError("sample ids must be unique")

    def originals(self) -> list[Sample]:
        return [s for s in self.samples if s.origin == "original"]

    def by_id(self, sample_id: str) -> Sample:
        for s in self.samples:
            if s.id == sample_id:
                return s
        raise KeyError(sample_id)

    def load(self, sample: Sample) -> np.ndarray:
        if sample.id in self.images:
            return self.images[sample.id]
        if sample.path is None:
            raise ValueError(f"sample {sample.id} has neither blob nor path")
        if self.root is None:
            raise ValueError("manifest has no root directory for path lookups")
        return load_image(os.path.join(self.root, sample.path))

    def kfold_k(self) -> int | None:
        if self.protocol.startswith("kfold:"):
            return int(self.protocol.split(":", 1)[1])
        return None


# ---------------------------------------------------------------------------
# Ingestion
# ---------------------------------------------------------------------------

def scan_directory(root: str) -> DatasetManifest:
    """Build a manifest from a class-per-subdirectory image tree.

    Classes are the sorted subdirectory names; samples are ordered
    lexicographically by path, so re-scanning is idempotent. Unreadable
    images are skipped with a note in the manifest.
    """
    if not os.path.isdir(root):
        raise ValueError(f"dataset root {root!r} is not a directory")
    class_names = sorted(
        d for d in os.listdir(root) if os.path.isdir(os.path.join(root, d)))
    if len(class_names) < 2:
        raise ValueError(f"need at least 2 class subdirectories, found {len(class_names)}")

    samples: list[Sample] = []
    notes: list[str] = []
    for label, cname in enumerate(class_names):
        cdir = os.path.join(root, cname)
        files = sorted(os.listdir(cdir))
        kept = 0
        for fname in files:
            rel = f"{cname}/{fname}"
            full = os.path.join(cdir, fname)
            if not os.path.isfile(full):
                continue
            try:
                load_image(full)
            except Exception as exc:  # unreadable: skip, record why
                notes.append(f"skipped unreadable image {rel}: {exc}")
                continue
            samples.append(Sample(id=rel, path=rel, label=label))
            kept += 1
        if kept == 0:
            raise ValueError(f"class {cname!r} has no readable images")
    return DatasetManifest(samples, class_names, root=root, notes=notes)


# ---------------------------------------------------------------------------
# Splits
# ---------------------------------------------------------------------------

def stratified_folds(manifest: DatasetManifest, k: int, seed: int) -> DatasetManifest:
    """Assign each original sample to one of k folds, stratified by class.

    Per-class fold sizes differ by at most 1 (round-robin deal over a
    seeded shuffle). Returns a new manifest; augmented samples inherit
    their parent's fold.
    """
    if k < 2:
        raise ValueError("k must be at least 2")
    originals = manifest.originals()
    fold_of: dict[str, int] = {}
    for label, cname in enumerate(manifest.classes):
        members = [s for s in originals if s.label == label]
        if len(members) < k:
            raise ValueError(f"class {cname!r} has {len(members)} samples, fewer than k={k}")
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(label,)))
        order = rng.permutation(len(members))
        for pos, idx in enumerate(order):
            fold_of[members[idx].id] = pos % k
    new_samples = []
    for s in manifest.samples:
        key = s.id if s.origin == "original" else s.parent_id
        new_samples.append(replace(s, fold=fold_of[key]))
    return replace(manifest, samples=new_samples, protocol=f"kfold:{k}")


def assign_train_test(manifest: DatasetManifest, test_fraction: float, seed: int) -> DatasetManifest:
    """Stratified holdout: fold 0 = train, fold 1 = test."""
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test fraction must lie strictly between 0 and 1")
    originals = manifest.originals()
    fold_of: dict[str, int] = {}
    for label, cname in enumerate(manifest.classes):
        members = [s for s in originals if s.label == label]
        n_test = max(1, int(round(len(members) * test_fraction)))
        if n_test >= len(members):
            raise ValueError(f"class {cname!r} too small for test fraction {test_fraction}")
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(label,)))
        order = rng.permutation(len(members))
        for pos, idx in enumerate(order):
            fold_of[members[idx].id] = 1 if pos < n_test else 0
    new_samples = []
    for s in manifest.samples:
        key = s.id if s.origin == "original" else s.parent_id
        new_samples.append(replace(s, fold=fold_of[key]))
    return replace(manifest, samples=new_samples, protocol="train_test")


def _training_originals(manifest: DatasetManifest) -> list[Sample]:
    """Originals eligible for augmentation under the manifest's protocol.

    train_test: the train split only. kfold or unsplit: every original
    (each sample is a training sample in some rotation; augmented samples
    carry their parent's fold so no rotation ever trains on a test fold).
    """
    originals = manifest.originals()
    if manifest.protocol == "train_test":
        return [s for s in originals if s.fold == 0]
    return originals


# ---------------------------------------------------------------------------
# Companion sampling
# ---------------------------------------------------------------------------

def sample_companions(manifest: DatasetManifest, sample: Sample, n_same: int,
                      n_other: int, rng: np.random.Generator) -> list[Sample]:
    """Draw companions for one sample, without replacement, never itself.

    The pool is restricted to originals in the sample's own fold (its own
    train split under train_test), so a companion can never sit in a test
    portion while the parent is being trained on, under any CV rotation.
    Same-class picks are drawn before other-class picks.
    """
    pool = [s for s in manifest.originals()
            if s.fold == sample.fold and s.id != sample.id]
    same = [s for s in pool if s.label == sample.label]
    other = [s for s in pool if s.label != sample.label]
    if len(same) < n_same:
        cname = manifest.classes[sample.label]
        raise ValueError(
            f"class {cname!r} has only {len(same)} available companions "
            f"for {sample.id}, need {n_same}")
    if len(other) < n_other:
        raise ValueError(
            f"only {len(other)} other-class companions available for "
            f"{sample.id}, need {n_other}")
    picks: list[Sample] = []
    if n_same:
        idx = rng.choice(len(same), n_same, replace=False)
        picks.extend(same[i] for i in idx)
    if n_other:
        idx = rng.choice(len(other), n_other, replace=False)
        picks.extend(other[i] for i in idx)
    return picks


# ---------------------------------------------------------------------------
# PCA basis fitting (app4 support)
# ---------------------------------------------------------------------------

def fit_pca_basis(manifest: DatasetManifest, seed: int, k: int = 64,
                  cap: int = 256) -> PcaBasis:
    """Fit the shared app4 basis on flattened grayscale training planes.

    Images are resized to the first training image's dims before
    flattening; at most ``cap`` images are used (seeded subsample), and k
    is capped by what the sample count supports.
    """
    train = _training_originals(manifest)
    if len(train) < 2:
        raise ValueError("need at least 2 training images to fit a basis")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(0xBA5,)))
    if len(train) > cap:
        idx = np.sort(rng.choice(len(train), cap, replace=False))
        train = [train[i] for i in idx]
    first = manifest.load(train[0])
    h, w = first.shape[:2]
    rows = []
    for s in train:
        img = manifest.load(s)
        if img.shape[:2] != (h, w):
            img = resize_bilinear(img, h, w)
        rows.append(to_gray(img).ravel())
    rows = np.stack(rows)
    k_eff = min(k, len(rows) - 1, rows.shape[1])
    return pca_fit(rows, k_eff)


# ---------------------------------------------------------------------------
# Grayscale detection
# ---------------------------------------------------------------------------

def _is_gray(img: np.ndarray) -> bool:
    img = as_image(img)
    if img.shape[2] == 1:
        return True
    return bool(np.array_equal(img[:, :, 0], img[:, :, 1])
                and np.array_equal(img[:, :, 1], img[:, :, 2]))


def dataset_is_grayscale(manifest: DatasetManifest) -> bool:
    """True when every original is 1-channel or has identical channels."""
    return all(_is_gray(manifest.load(s)) for s in manifest.originals())


# ---------------------------------------------------------------------------
# Export
# ---------------------------------------------------------------------------

def _flat(sample_id: str) -> str:
    return sample_id.replace("/", "_").replace("\\", "_")


def export_augmented(manifest: DatasetManifest, specs: list[AugmentationSpec],
                     out_root: str, seed: int, max_workers: int = 4) -> DatasetManifest:
    """Materialize originals plus every augmented derivative under out_root.

    Per spec and per eligible training sample, apply_app output k becomes
    ``appN/<parent>_k.png`` with provenance recorded. Color-only pipelines
    are skipped wholesale (with a note) on grayscale datasets. Work runs
    on a bounded thread pool; all seeds are pre-derived per (app, sample)
    so the result is independent of scheduling, and the manifest is
    written in submission order as a single final step.
    """
    os.makedirs(out_root, exist_ok=True)
    os.makedirs(os.path.join(out_root, "original"), exist_ok=True)

    notes = list(manifest.notes)
    new_samples: list[Sample] = []
    for s in manifest.originals():
        rel = f"original/{_flat(s.id)}.png"
        save_image(manifest.load(s), os.path.join(out_root, rel))
        new_samples.append(replace(s, path=rel))

    gray_dataset = dataset_is_grayscale(manifest)
    train = _training_originals(manifest)

    todo = []
    for spec in specs:
        if gray_dataset and spec.app_id in COLOR_ONLY:
            notes.append(f"app{spec.app_id} skipped: color-only pipeline on a grayscale dataset")
            continue
        spec = _prepare_spec(spec, manifest, seed)
        n_same, n_other = spec.companion_policy
        os.makedirs(os.path.join(out_root, f"app{spec.app_id}"), exist_ok=True)
        for s_idx, s in enumerate(train):
            base = np.random.SeedSequence(seed, spawn_key=(spec.app_id, s_idx))
            aug_seq, comp_seq = base.spawn(2)
            aug_seed = int(aug_seq.generate_state(1, np.uint64)[0])
            comp_rng = np.random.Generator(np.random.PCG64(comp_seq))
            companions = sample_companions(manifest, s, n_same, n_other, comp_rng)
            todo.append((spec, s, aug_seed, companions))

    def run(job):
        spec, s, aug_seed, companions = job
        img = manifest.load(s)
        comp_imgs = []
        for comp in companions:
            arr = manifest.load(comp)
            if arr.shape != img.shape:
                arr = resize_bilinear(arr, img.shape[0], img.shape[1])
                if arr.shape[2] != img.shape[2]:
                    raise ValueError(
                        f"companion {comp.id} channel count differs from {s.id}")
            comp_imgs.append(arr)
        outs = apply_app(spec, img, comp_imgs, seed=aug_seed)
        records = []
        for k, out in enumerate(outs):
            rel = f"app{spec.app_id}/{_flat(s.id)}_{k}.png"
            try:
                save_image(out, os.path.join(out_root, rel))
            except OSError as exc:
                raise OSError(f"failed writing {rel}: {exc}") from exc
            records.append(Sample(
                id=f"app{spec.app_id}/{_flat(s.id)}_{k}", path=rel, label=s.label,
                origin=f"app{spec.app_id}", parent_id=s.id, fold=s.fold,
                group=s.group))
        return records

    if todo:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            for records in pool.map(run, todo):  # order follows submission
                new_samples.extend(records)

    out = DatasetManifest(new_samples, manifest.classes, protocol=manifest.protocol,
                          root=out_root, notes=notes)
    write_manifest(out, os.path.join(out_root, "manifest.tsv"))
    return out


def _prepare_spec(spec: AugmentationSpec, manifest: DatasetManifest, seed: int) -> AugmentationSpec:
    if spec.app_id == 4 and "pca_basis" not in spec.params:
        params = dict(spec.params)
        params["pca_basis"] = fit_pca_basis(manifest, seed)
        return AugmentationSpec(spec.app_id, seed=spec.seed, params=params)
    return spec


# ---------------------------------------------------------------------------
# Synthetic datasets
# ---------------------------------------------------------------------------

@dataclass
class SyntheticSpec:
    n_classes: int = 3
    samples_per_class: int = 20
    image_size: int = 64
    noise_level: float = 0.08
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.image_size < 16:
            raise ValueError("image size must be at least 16")
        if self.samples_per_class < 1:
            raise ValueError("need at least 1 sample per class")
        if self.noise_level < 0:
            raise ValueError("noise level must be non-negative")


def _class_pattern(label: int, n_classes: int, size: int) -> np.ndarray:
    """Deterministic blurred-blob base image for one class (RGB)."""
    c = (size - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(size), np.arange(size), indexing="ij")
    angle = 2.0 * np.pi * label / n_classes
    bx = c + 0.30 * size * np.cos(angle)
    by = c + 0.30 * size * np.sin(angle)
    sig = size / 6.0
    blob = np.exp(-((xx - bx) ** 2 + (yy - by) ** 2) / (2.0 * sig ** 2))
    grating = 0.5 + 0.5 * np.sin(2.0 * np.pi * (label + 2) * xx / size)
    tint = np.array([
        0.35 + 0.55 * ((label * 2654435761) % 97) / 96.0,
        0.35 + 0.55 * ((label * 40503) % 89) / 88.0,
        0.35 + 0.55 * ((label * 69069) % 83) / 82.0,
    ])
    base = 0.25 + 0.55 * blob[:, :, None] * tint[None, None, :]
    base += 0.12 * grating[:, :, None] * (1.0 - tint[None, None, :])
    return np.clip(base, 0.0, 1.0)


def make_synthetic(spec: SyntheticSpec) -> DatasetManifest:
    """In-memory RGB dataset: class-specific pattern plus seeded noise.

    noise_level 0 makes every image of a class identical; any fixed seed
    reproduces identical pixels.
    """
    samples = []
    images = {}
    classes = [f"class{c}" for c in range(spec.n_classes)]
    for label in range(spec.n_classes):
        base = _class_pattern(label, spec.n_classes, spec.image_size)
        for i in range(spec.samples_per_class):
            rng = np.random.default_rng(
                np.random.SeedSequence(spec.seed, spawn_key=(label, i)))
            noise = rng.standard_normal(base.shape) * spec.noise_level
            img = np.clip(base + noise, 0.0, 1.0)
            sid = f"class{label}/syn{i:03d}"
            samples.append(Sample(id=sid, path=None, label=label))
            images[sid] = img
    return DatasetManifest(samples, classes, images=images)


# ---------------------------------------------------------------------------
# Manifest IO
# ---------------------------------------------------------------------------

def write_manifest(manifest: DatasetManifest, path: str) -> None:
    lines = [f"# classes: {','.join(manifest.classes)}",
             f"# protocol: {manifest.protocol}"]
    lines += [f"# note: {n}" for n in manifest.notes]
    for s in manifest.samples:
        lines.append("\t".join([
            s.id, s.path or MISSING, str(s.label), s.origin,
            s.parent_id or MISSING, str(s.fold)]))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_manifest(path: str) -> DatasetManifest:
    classes: list[str] = []
    protocol = "unsplit"
    notes: list[str] = []
    samples: list[Sample] = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body.startswith("classes:"):
                    classes = [c.strip() for c in body[len("classes:"):].split(",") if c.strip()]
                elif body.startswith("protocol:"):
                    protocol = body[len("protocol:"):].strip()
                elif body.startswith("note:"):
                    notes.append(body[len("note:"):].strip())
                continue
            parts = line.split("\t")
            if len(parts) != 6:
                raise ValueError(f"malformed manifest line: {line!r}")
            sid, rel, label, origin, parent, fold = parts
            samples.append(Sample(
                id=sid, path=None if rel == MISSING else rel, label=int(label),
                origin=origin, parent_id=None if parent == MISSING else parent,
                fold=int(fold)))
    if not classes:
        raise ValueError(f"manifest {path!r} lacks a classes header")
    return DatasetManifest(samples, classes, protocol=protocol,
                           root=os.path.dirname(os.path.abspath(path)), notes=notes)

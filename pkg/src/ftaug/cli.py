"""Command-line entry points.

Subcommands: ``augment`` (materialize augmented datasets), ``demo``
(synthetic end-to-end run with the built-in classifier), ``fuse``
(sum-rule fusion of score files), ``metrics`` (accuracy and EUC per
score file), and ``diversity`` (pairwise cosine matrix). Every command
takes --seed and --out; all randomness derives from that one seed, so a
repeated invocation reproduces its artifacts byte for byte. Exit status
is 0 only when every requested artifact was written; 2 flags a
requested-but-unsupported pipeline.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .augment import AugmentationSpec
from .config import DatasetConfig, RunConfig, read_config
from .data import (
    DatasetManifest,
    SyntheticSpec,
    assign_train_test,
    export_augmented,
    make_synthetic,
    read_manifest,
    scan_directory,
    stratified_folds,
)
from .ensemble import (
    EnsembleDef,
    ScoreMatrix,
    build_ensemble,
    cosine_diversity,
    euc_multiclass,
    read_scores,
    softmax,
    sum_rule_fuse,
    toy_predict,
    toy_train,
    write_scores,
)
from .report import (
    format_metrics,
    render_diversity_figure,
    render_metrics_figure,
    write_diversity_tsv,
    write_metrics_tsv,
)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNSUPPORTED = 2

# Demo protocol: run 1 covers every built-in set; run 2 repeats the
# non-feature sets so replicate-based ensembles have a second member.
_RUN1_APPS = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 12, 13, 14]
_RUN2_APPS = [1, 2, 3, 6, 7, 8, 9]


def _derive_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=key).generate_state(1, np.uint64)[0])


def _build_dataset(cfg: DatasetConfig, seed: int) -> DatasetManifest:
    if cfg.kind == "synthetic":
        manifest = make_synthetic(SyntheticSpec(
            n_classes=cfg.n_classes, samples_per_class=cfg.samples_per_class,
            image_size=cfg.image_size, noise_level=cfg.noise_level, seed=seed))
    else:
        manifest = scan_directory(cfg.root)
    if cfg.protocol == "train_test":
        manifest = assign_train_test(manifest, cfg.test_fraction, seed)
    elif cfg.protocol == "kfold":
        manifest = stratified_folds(manifest, cfg.k, seed)
    return manifest


# ---------------------------------------------------------------------------
# augment
# ---------------------------------------------------------------------------

def cmd_augment(args) -> int:
    cfg = read_config(args.config)
    seed = args.seed if args.seed is not None else cfg.seed
    out = args.out or cfg.out
    if not out:
        print("augment: no output directory (give --out)", file=sys.stderr)
        return EXIT_ERROR
    unsupported = [s for s in cfg.apps if s.app_id == 11 and "backend" not in s.params]
    if unsupported:
        print("augment: app11 is unsupported without an external feature backend",
              file=sys.stderr)
        return EXIT_UNSUPPORTED
    manifest = _build_dataset(cfg.dataset, seed)
    result = export_augmented(manifest, cfg.apps, out, seed=seed,
                              max_workers=cfg.workers)
    n_aug = sum(1 for s in result.samples if s.origin != "original")
    print(f"wrote {len(result.samples)} samples ({n_aug} augmented) to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# demo
# ---------------------------------------------------------------------------

def _train_member(train_imgs, train_labels, test_imgs, test_ids, tag):
    model = toy_train(train_imgs, np.asarray(train_labels))
    logits = toy_predict(model, test_imgs, test_ids, tag)
    # softmax first so fused members weigh in on a common scale
    return ScoreMatrix(softmax(logits.scores), logits.sample_ids, tag)


def run_demo(seed: int, out: str, dataset: DatasetConfig | None = None,
             workers: int = 4):
    """Full synthetic pipeline; returns (metric rows, member registry)."""
    dataset = dataset or DatasetConfig()
    os.makedirs(out, exist_ok=True)
    scores_dir = os.path.join(out, "scores")
    os.makedirs(scores_dir, exist_ok=True)

    manifest = _build_dataset(dataset, seed)
    run_specs = {1: _RUN1_APPS, 2: _RUN2_APPS}
    exported = {}
    for run, app_ids in run_specs.items():
        exported[run] = export_augmented(
            manifest, [AugmentationSpec(a) for a in app_ids],
            os.path.join(out, "aug", f"run{run}"),
            seed=_derive_seed(seed, 100, run), max_workers=workers)

    base = exported[1]
    train_orig = [s for s in base.samples if s.origin == "original" and s.fold == 0]
    test_orig = [s for s in base.samples if s.origin == "original" and s.fold == 1]
    test_imgs = [base.load(s) for s in test_orig]
    test_ids = [s.id for s in test_orig]
    labels_by_id = {s.id: s.label for s in test_orig}
    test_labels = np.array([s.label for s in test_orig])
    orig_imgs = [base.load(s) for s in train_orig]
    orig_labels = [s.label for s in train_orig]

    registry: dict[str, ScoreMatrix] = {}
    member_tags: list[str] = []
    noda = _train_member(orig_imgs, orig_labels, test_imgs, test_ids, "noda-run1")
    registry[noda.classifier_tag] = noda
    write_scores(noda, os.path.join(scores_dir, "noda-run1.csv"))
    for run, app_ids in run_specs.items():
        m = exported[run]
        for app_id in app_ids:
            aug = [s for s in m.samples if s.origin == f"app{app_id}"]
            imgs = orig_imgs + [m.load(s) for s in aug]
            labels = orig_labels + [s.label for s in aug]
            tag = f"app{app_id}-run{run}"
            member = _train_member(imgs, labels, test_imgs, test_ids, tag)
            registry[tag] = member
            member_tags.append(tag)
            write_scores(member, os.path.join(scores_dir, f"{tag}.csv"))
    member_tags.sort(key=lambda t: (int(t.split("-run")[0][3:]), t))

    have = set(member_tags)
    ensembles = [
        EnsembleDef("EnsDA_A", [f"app{a}-run1" for a in range(1, 11)
                                if f"app{a}-run1" in have]),
        EnsembleDef("EnsDA_B", [f"app{a}-run1" for a in list(range(1, 11)) + [12, 13, 14]
                                if f"app{a}-run1" in have]),
        EnsembleDef("EnsDA_C", [f"app{a}-run{r}" for a in _RUN2_APPS for r in (1, 2)]),
        EnsembleDef("Ens_Base_1", ["app3-run1"]),
        EnsembleDef("Ens_Base_2", ["app3-run1", "app3-run2"]),
    ]

    rows = [("NoDA", euc_multiclass(noda, test_labels))]
    for tag in member_tags:
        rows.append((tag, euc_multiclass(registry[tag], test_labels)))
    for edef in ensembles:
        rows.append((edef.name, build_ensemble(edef, registry, labels_by_id)))

    write_metrics_tsv(rows, os.path.join(out, "metrics.tsv"))
    render_metrics_figure(rows, os.path.join(out, "metrics.png"))
    div_tags = member_tags
    matrix = cosine_diversity([registry[t] for t in div_tags])
    write_diversity_tsv(div_tags, matrix, os.path.join(out, "diversity.tsv"))
    render_diversity_figure(div_tags, matrix, os.path.join(out, "diversity.png"))
    return rows, registry


def cmd_demo(args) -> int:
    if not args.out:
        print("demo: no output directory (give --out)", file=sys.stderr)
        return EXIT_ERROR
    dataset = None
    workers = args.workers
    if args.config:
        cfg = read_config(args.config)
        dataset = cfg.dataset
        workers = cfg.workers if args.workers is None else workers
    print("note: app11 skipped, no external feature backend configured",
          file=sys.stderr)
    rows, _ = run_demo(args.seed or 0, args.out, dataset, workers or 4)
    sys.stdout.write(format_metrics(rows))
    return EXIT_OK


# ---------------------------------------------------------------------------
# fuse / metrics / diversity
# ---------------------------------------------------------------------------

def _load_scores(paths) -> list[ScoreMatrix]:
    return [read_scores(p) for p in paths]


def cmd_fuse(args) -> int:
    members = _load_scores(args.scores)
    fused = sum_rule_fuse(members, tag=args.name)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, f"{args.name}.csv")
    write_scores(fused, path)
    print(f"wrote {path}")
    return EXIT_OK


def _labels_from_manifest(path: str) -> dict:
    manifest = read_manifest(path)
    return {s.id: s.label for s in manifest.samples}


def cmd_metrics(args) -> int:
    labels_by_id = _labels_from_manifest(args.manifest)
    rows = []
    for m in _load_scores(args.scores):
        try:
            labels = np.array([labels_by_id[sid] for sid in m.sample_ids])
        except KeyError as exc:
            print(f"metrics: sample id {exc.args[0]!r} not in manifest", file=sys.stderr)
            return EXIT_ERROR
        rows.append((m.classifier_tag, euc_multiclass(m, labels)))
    sys.stdout.write(format_metrics(rows))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_metrics_tsv(rows, os.path.join(args.out, "metrics.tsv"))
        render_metrics_figure(rows, os.path.join(args.out, "metrics.png"))
    return EXIT_OK


def cmd_diversity(args) -> int:
    members = _load_scores(args.scores)
    tags = [m.classifier_tag for m in members]
    matrix = cosine_diversity(members)
    os.makedirs(args.out, exist_ok=True)
    write_diversity_tsv(tags, matrix, os.path.join(args.out, "diversity.tsv"))
    render_diversity_figure(tags, matrix, os.path.join(args.out, "diversity.png"))
    print(f"wrote diversity matrix for {len(tags)} members to {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ftaug",
        description="Feature-transform image augmentation and ensemble evaluation")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("augment", help="materialize augmented datasets from a config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("demo", help="synthetic end-to-end run with the toy classifier")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("fuse", help="sum-rule fusion of score files")
    p.add_argument("scores", nargs="+")
    p.add_argument("--name", default="fused")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("metrics", help="accuracy and EUC for score files")
    p.add_argument("scores", nargs="+")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("diversity", help="pairwise cosine similarity of score files")
    p.add_argument("scores", nargs="+")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diversity)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"ftaug: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

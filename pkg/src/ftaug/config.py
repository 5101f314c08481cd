"""Flat key-value run configuration with repeated section blocks.

Grammar, line by line::

    # comment (or blank)
    key = value            top-level, before any section
    [section]              starts a block; [app] and [ensemble] may repeat
    key = value            belongs to the open block

Exactly one ``[dataset]`` block describes the input; each ``[app]``
block requests one augmentation set; each ``[ensemble]`` block names a
fusion of classifier tags. Unknown keys are errors so typos cannot
silently change a run.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .augment import APP_OUTPUT_COUNTS, AugmentationSpec
from .ensemble import EnsembleDef

__all__ = ["DatasetConfig", "RunConfig", "parse_config", "read_config"]

_TOP_KEYS = {"seed", "out", "workers"}
_DATASET_KEYS = {
    "kind", "root", "n_classes", "samples_per_class", "image_size",
    "noise_level", "protocol", "test_fraction", "k",
}
_APP_KEYS = {
    "id", "p", "cutoff", "total_angles", "keep_angles", "zero_columns",
    "amplitude_px", "shift_max",
}
_APP_FLOAT = {"p", "amplitude_px"}
_ENSEMBLE_KEYS = {"name", "members", "rule"}


@dataclass
class DatasetConfig:
    kind: str = "synthetic"  # "synthetic" | "directory"
    root: str | None = None
    n_classes: int = 3
    samples_per_class: int = 20
    image_size: int = 64
    # high enough that the toy classifier leaves headroom for fusion gains
    noise_level: float = 0.8
    protocol: str = "train_test"  # "train_test" | "kfold" | "none"
    test_fraction: float = 0.25
    k: int = 5

    def __post_init__(self) -> None:
        if self.kind not in ("synthetic", "directory"):
            raise ValueError(f"unknown dataset kind {self.kind!r}")
        if self.kind == "directory" and not self.root:
            raise ValueError("directory datasets need a root")
        if self.protocol not in ("train_test", "kfold", "none"):
            raise ValueError(f"unknown protocol {self.protocol!r}")


@dataclass
class RunConfig:
    seed: int = 0
    out: str | None = None
    workers: int = 4
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    apps: list[AugmentationSpec] = field(default_factory=list)
    ensembles: list[EnsembleDef] = field(default_factory=list)


def _parse_value(key: str, value: str):
    if key in ("kind", "root", "protocol", "out", "name", "rule"):
        return value
    if key == "members":
        return [t.strip() for t in value.split(",") if t.strip()]
    if key in ("noise_level", "test_fraction") or key in _APP_FLOAT:
        return float(value)
    return int(value)


def parse_config(text: str) -> RunConfig:
    top: dict = {}
    dataset: dict | None = None
    apps: list[dict] = []
    ensembles: list[dict] = []
    current: dict | None = top
    allowed = _TOP_KEYS
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section == "dataset":
                if dataset is not None:
                    raise ValueError(f"line {lineno}: [dataset] may appear only once")
                dataset = {}
                current, allowed = dataset, _DATASET_KEYS
            elif section == "app":
                apps.append({})
                current, allowed = apps[-1], _APP_KEYS
            elif section == "ensemble":
                ensembles.append({})
                current, allowed = ensembles[-1], _ENSEMBLE_KEYS
            else:
                raise ValueError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value, got {line!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in allowed:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key in current:
            raise ValueError(f"line {lineno}: duplicate key {key!r}")
        try:
            current[key] = _parse_value(key, value)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: bad value for {key!r}: {value!r}") from exc

    cfg = RunConfig(**top)
    if dataset is not None:
        cfg.dataset = DatasetConfig(**dataset)
    for block in apps:
        if "id" not in block:
            raise ValueError("[app] block needs an id")
        app_id = block.pop("id")
        if app_id not in APP_OUTPUT_COUNTS:
            raise ValueError(f"unknown app id {app_id}")
        cfg.apps.append(AugmentationSpec(app_id, params=dict(block)))
    for block in ensembles:
        if "name" not in block or "members" not in block:
            raise ValueError("[ensemble] block needs name and members")
        cfg.ensembles.append(EnsembleDef(
            block["name"], block["members"], rule=block.get("rule", "sum")))
    return cfg


def read_config(path: str) -> RunConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())

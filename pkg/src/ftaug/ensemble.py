"""Score fusion, evaluation metrics, and the built-in toy classifier.

Scores travel as (N, K) float64 matrices tied to sample ids and a
classifier tag. Fusion is the sum rule over aligned rows; accuracy and
EUC (one minus mean one-vs-all AUC) are the headline metrics, with a
Wilcoxon signed-rank test for paired comparisons and pairwise cosine
similarity as the ensemble diversity measure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy.optimize import minimize

from .image import as_image, resize_bilinear, to_gray

__all__ = [
    "EnsembleDef",
    "MetricReport",
    "ScoreMatrix",
    "ToyModel",
    "WilcoxonResult",
    "accuracy",
    "auc_binary",
    "build_ensemble",
    "cosine_diversity",
    "euc_multiclass",
    "group_average",
    "read_scores",
    "softmax",
    "sum_rule_fuse",
    "toy_predict",
    "toy_train",
    "wilcoxon_signed_rank",
    "write_scores",
]


@dataclass
class ScoreMatrix:
    """Per-sample class scores from one classifier run."""

    scores: np.ndarray  # (N, K)
    sample_ids: list[str]
    classifier_tag: str

    def __post_init__(self) -> None:
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.scores.ndim != 2 or self.scores.shape[0] == 0 or self.scores.shape[1] == 0:
            raise ValueError("scores must be a non-empty (N, K) matrix")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("scores must be finite")
        if len(self.sample_ids) != self.scores.shape[0]:
            raise ValueError("sample_ids length must match score rows")
        if len(set(self.sample_ids)) != len(self.sample_ids):
            raise ValueError("sample ids must be unique")

    def predictions(self) -> np.ndarray:
        # argmax resolves ties toward the lowest class index
        return np.argmax(self.scores, axis=1)


@dataclass
class MetricReport:
    accuracy: float
    euc: float
    per_class_auc: np.ndarray


@dataclass
class WilcoxonResult:
    statistic: float  # W+ over nonzero differences
    p_value: float
    n: int  # differences remaining after zero removal
    method: str


@dataclass
class EnsembleDef:
    name: str
    member_tags: list[str]
    rule: str = "sum"
    grouping: dict | None = None  # sample id -> group key

    def __post_init__(self) -> None:
        if not self.member_tags:
            raise ValueError("ensemble needs at least one member")
        if self.rule not in ("sum", "average"):
            raise ValueError(f"unknown fusion rule {self.rule!r}")


# ---------------------------------------------------------------------------
# Fusion
# ---------------------------------------------------------------------------

def sum_rule_fuse(members: list[ScoreMatrix], tag: str = "fused") -> ScoreMatrix:
    """Elementwise sum of member scores, rows aligned by sample id.

    Later members are reordered to the first member's id order; a member
    with a different id set is an error.
    """
    if not members:
        raise ValueError("need at least one member to fuse")
    first = members[0]
    total = first.scores.copy()
    index = {sid: i for i, sid in enumerate(first.sample_ids)}
    for m in members[1:]:
        if m.scores.shape != first.scores.shape:
            raise ValueError("member score shapes differ")
        if set(m.sample_ids) != set(index):
            raise ValueError(f"member {m.classifier_tag!r} covers different sample ids")
        rows = np.empty_like(m.scores)
        for i, sid in enumerate(m.sample_ids):
            rows[index[sid]] = m.scores[i]
        total += rows
    return ScoreMatrix(total, list(first.sample_ids), tag)


def group_average(member: ScoreMatrix, groups: dict) -> ScoreMatrix:
    """Average score rows that share a group key; one output row per group.

    Groups are ordered by first appearance in the member's id order.
    Every sample id must be mapped.
    """
    missing = [sid for sid in member.sample_ids if sid not in groups]
    if missing:
        raise ValueError(f"{len(missing)} sample ids lack a group (first: {missing[0]!r})")
    order: list = []
    rows: dict = {}
    for i, sid in enumerate(member.sample_ids):
        g = groups[sid]
        if g not in rows:
            rows[g] = []
            order.append(g)
        rows[g].append(member.scores[i])
    out = np.stack([np.mean(rows[g], axis=0) for g in order])
    return ScoreMatrix(out, [str(g) for g in order], member.classifier_tag)


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def accuracy(scores: ScoreMatrix, labels: np.ndarray) -> float:
    labels = np.asarray(labels)
    if labels.shape != (scores.scores.shape[0],):
        raise ValueError("labels must align with score rows")
    return float(np.mean(scores.predictions() == labels))


def _midranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties sharing the average rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=np.float64)
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i:j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def auc_binary(pos: np.ndarray, neg: np.ndarray) -> float:
    """Rank-based AUC, ties counting one half.

    Equals the explicit pairwise count
    mean over (p, n) of [p > n] + 0.5 [p == n] exactly, midranks being
    half-integers.
    """
    pos = np.asarray(pos, dtype=np.float64)
    neg = np.asarray(neg, dtype=np.float64)
    if pos.size == 0 or neg.size == 0:
        raise ValueError("both score lists must be non-empty")
    ranks = _midranks(np.concatenate([pos, neg]))
    r_pos = ranks[:pos.size].sum()
    u = r_pos - pos.size * (pos.size + 1) / 2.0
    return float(u / (pos.size * neg.size))


def euc_multiclass(scores: ScoreMatrix, labels: np.ndarray) -> MetricReport:
    """Accuracy plus EUC = 1 - mean one-vs-all AUC over the classes."""
    labels = np.asarray(labels)
    if labels.shape != (scores.scores.shape[0],):
        raise ValueError("labels must align with score rows")
    k = scores.scores.shape[1]
    present = np.unique(labels)
    if present.size < 2:
        raise ValueError("need at least two classes present to score")
    aucs = np.empty(k, dtype=np.float64)
    for c in range(k):
        mask = labels == c
        if not mask.any() or mask.all():
            raise ValueError(f"class {c} needs both positives and negatives")
        aucs[c] = auc_binary(scores.scores[mask, c], scores.scores[~mask, c])
    return MetricReport(accuracy(scores, labels), float(1.0 - aucs.mean()), aucs)


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank
# ---------------------------------------------------------------------------

_EXACT_LIMIT = 12


def _exact_p(ranks2: np.ndarray, w2: int) -> float:
    """Two-sided exact p for W+ with doubled-integer ranks, via subset-sum DP."""
    total = int(ranks2.sum())
    counts = np.zeros(total + 1, dtype=np.float64)
    counts[0] = 1.0
    for r in ranks2:
        shifted = np.zeros_like(counts)
        shifted[r:] = counts[:total + 1 - r]
        counts = counts + shifted
    n_total = counts.sum()
    p_low = counts[:w2 + 1].sum() / n_total
    p_high = counts[w2:].sum() / n_total
    return float(min(1.0, 2.0 * min(p_low, p_high)))


def wilcoxon_signed_rank(x: np.ndarray, y: np.ndarray, method: str = "auto") -> WilcoxonResult:
    """Paired two-sided Wilcoxon signed-rank test.

    Zero differences are dropped; tied absolute differences share average
    ranks. The null distribution is enumerated exactly for n <= 12 (or
    when forced with method="exact"); larger n uses the normal
    approximation with tie and continuity corrections. All differences
    zero gives p = 1.0.
    """
    if method not in ("auto", "exact", "approx"):
        raise ValueError(f"unknown method {method!r}")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError("inputs must be 1-D arrays of equal length")
    d = x - y
    d = d[d != 0.0]
    n = d.size
    if n == 0:
        return WilcoxonResult(0.0, 1.0, 0, "degenerate")
    ranks = _midranks(np.abs(d))
    w_plus = float(ranks[d > 0].sum())
    use_exact = method == "exact" or (method == "auto" and n <= _EXACT_LIMIT)
    if use_exact:
        ranks2 = np.rint(2.0 * ranks).astype(np.int64)
        p = _exact_p(ranks2, int(round(2.0 * w_plus)))
        return WilcoxonResult(w_plus, p, n, "exact")
    mu = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0
    _, tie_counts = np.unique(ranks, return_counts=True)
    var -= float(np.sum(tie_counts.astype(np.float64) ** 3 - tie_counts)) / 48.0
    if var <= 0.0:
        return WilcoxonResult(w_plus, 1.0, n, "approx")
    dev = w_plus - mu
    z = (dev - 0.5 * np.sign(dev)) / math.sqrt(var)
    p = min(1.0, math.erfc(abs(z) / math.sqrt(2.0)))
    return WilcoxonResult(w_plus, p, n, "approx")


# ---------------------------------------------------------------------------
# Diversity
# ---------------------------------------------------------------------------

def cosine_diversity(members: list[ScoreMatrix]) -> np.ndarray:
    """Pairwise cosine similarity of flattened score matrices (diag 1).

    Rows of every member are aligned to the first member's id order
    before flattening, so row order cannot masquerade as diversity.
    """
    if not members:
        raise ValueError("need at least one member")
    first = members[0]
    index = {sid: i for i, sid in enumerate(first.sample_ids)}
    flats = []
    for m in members:
        if set(m.sample_ids) != set(index) or m.scores.shape != first.scores.shape:
            raise ValueError(f"member {m.classifier_tag!r} is not aligned with the first")
        rows = np.empty_like(m.scores)
        for i, sid in enumerate(m.sample_ids):
            rows[index[sid]] = m.scores[i]
        v = rows.ravel()
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise ValueError(f"member {m.classifier_tag!r} has all-zero scores")
        flats.append(v / norm)
    mm = len(flats)
    out = np.eye(mm)
    for i, j in combinations(range(mm), 2):
        out[i, j] = out[j, i] = float(np.dot(flats[i], flats[j]))
    return out


# ---------------------------------------------------------------------------
# Toy classifier
# ---------------------------------------------------------------------------

_TOY_SIZE = 16


@dataclass
class ToyModel:
    weights: np.ndarray  # (D + 1, K), last row is the bias
    feat_mean: np.ndarray
    feat_std: np.ndarray
    n_classes: int
    side: int = _TOY_SIZE


def _toy_features(images: list, side: int) -> np.ndarray:
    rows = []
    for img in images:
        img = as_image(img)
        plane = as_image(to_gray(img))
        if plane.shape[:2] != (side, side):
            plane = resize_bilinear(plane, side, side)
        rows.append(plane.ravel())
    return np.stack(rows)


def softmax(scores: np.ndarray) -> np.ndarray:
    scores = np.asarray(scores, dtype=np.float64)
    shifted = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def toy_train(images: list, labels: np.ndarray, l2: float = 1e-3,
              max_iter: int = 200) -> ToyModel:
    """L2-regularized multinomial logistic regression on 16x16 gray planes.

    The solver is deterministic: zeros start, full-batch objective, fixed
    iteration budget. Training-set order only perturbs floating-point
    summation, so refitting a permuted set gives the same model up to
    roundoff.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if len(images) != labels.shape[0]:
        raise ValueError("images and labels must align")
    classes = np.unique(labels)
    if classes.size < 2:
        raise ValueError("need at least two classes to train")
    n_classes = int(classes.max()) + 1
    feats = _toy_features(images, _TOY_SIZE)
    mean = feats.mean(axis=0)
    std = feats.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    xs = np.hstack([(feats - mean) / std, np.ones((len(feats), 1))])
    n, d = xs.shape
    onehot = np.zeros((n, n_classes))
    onehot[np.arange(n), labels] = 1.0

    def objective(wflat):
        w = wflat.reshape(d, n_classes)
        probs = softmax(xs @ w)
        # bias row is excluded from the penalty
        loss = -np.sum(onehot * np.log(probs + 1e-300)) / n
        loss += 0.5 * l2 * np.sum(w[:-1] ** 2)
        grad = xs.T @ (probs - onehot) / n
        grad[:-1] += l2 * w[:-1]
        return loss, grad.ravel()

    res = minimize(objective, np.zeros(d * n_classes), jac=True,
                   method="L-BFGS-B", options={"maxiter": max_iter})
    w = res.x.reshape(d, n_classes)
    return ToyModel(w, mean, std, n_classes)


def toy_predict(model: ToyModel, images: list, sample_ids: list[str] | None = None,
                tag: str = "toy") -> ScoreMatrix:
    """Logit scores for a batch of images (softmax is the caller's choice)."""
    feats = _toy_features(images, model.side)
    xs = np.hstack([(feats - model.feat_mean) / model.feat_std,
                    np.ones((len(feats), 1))])
    logits = xs @ model.weights
    if sample_ids is None:
        sample_ids = [f"s{i}" for i in range(len(images))]
    return ScoreMatrix(logits, list(sample_ids), tag)


# ---------------------------------------------------------------------------
# Ensemble evaluation
# ---------------------------------------------------------------------------

def build_ensemble(edef: EnsembleDef, registry: dict, labels_by_id: dict) -> MetricReport:
    """Fuse the named members and score the result.

    ``registry`` maps classifier tags to ScoreMatrix; ``labels_by_id``
    maps sample (or group) ids to integer labels. With a grouping, each
    member is group-averaged before fusion. A one-member ensemble scores
    identically to the member itself.
    """
    missing = [t for t in edef.member_tags if t not in registry]
    if missing:
        raise ValueError(f"ensemble {edef.name!r} references unknown tags: {missing}")
    members = [registry[t] for t in edef.member_tags]
    if edef.grouping is not None:
        members = [group_average(m, edef.grouping) for m in members]
    fused = sum_rule_fuse(members, tag=edef.name)
    if edef.rule == "average":
        fused = ScoreMatrix(fused.scores / len(members), fused.sample_ids, edef.name)
    try:
        labels = np.array([labels_by_id[sid] for sid in fused.sample_ids])
    except KeyError as exc:
        raise ValueError(f"no label for sample id {exc.args[0]!r}") from exc
    return euc_multiclass(fused, labels)


# ---------------------------------------------------------------------------
# Score file IO
# ---------------------------------------------------------------------------

def write_scores(matrix: ScoreMatrix, path: str) -> None:
    """CSV with header id,score_0,...,score_{K-1}; 12 significant digits."""
    k = matrix.scores.shape[1]
    header = "id," + ",".join(f"score_{c}" for c in range(k))
    lines = [header]
    for sid, row in zip(matrix.sample_ids, matrix.scores):
        lines.append(sid + "," + ",".join(f"{v:.12g}" for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_scores(path: str, tag: str | None = None) -> ScoreMatrix:
    """Read a score CSV; the tag defaults to the file stem."""
    import os

    with open(path, encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("id,"):
        raise ValueError(f"{path!r} lacks the id,score_* header")
    ids = []
    rows = []
    width = len(lines[0].split(","))
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != width:
            raise ValueError(f"malformed score row: {ln!r}")
        ids.append(parts[0])
        rows.append([float(v) for v in parts[1:]])
    if tag is None:
        tag = os.path.splitext(os.path.basename(path))[0]
    return ScoreMatrix(np.array(rows), ids, tag)

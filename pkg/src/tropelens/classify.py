"""Trope-presence feature matrices and L2-regularized multinomial logistic regression.

Objective over the training rows, with softmax probabilities ``P``::

    sum_i -log P[i, y_i]  +  ||W||^2 / (2 C)

The bias vector is not penalized.
"""

from __future__ import annotations

import enum
import math
import warnings
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateLabels, InsufficientData, RangeError
from .optim import lbfgs
from .scoring import GenderednessReport


class ConvergenceWarning(UserWarning):
    pass


class RatingBin(str, enum.Enum):
    LOW = "Low"
    MEDIUM = "Medium"
    HIGH = "High"


LOW_UPPER = 6.7
MEDIUM_UPPER = 7.7


def bin_rating(rating: float) -> RatingBin:
    """Low (0, 6.7], Medium (6.7, 7.7], High (7.7, 10]."""
    if rating is None or math.isnan(rating) or not 0.0 < rating <= 10.0:
        raise RangeError(f"rating {rating!r} outside (0, 10]")
    if rating <= LOW_UPPER:
        return RatingBin.LOW
    if rating <= MEDIUM_UPPER:
        return RatingBin.MEDIUM
    return RatingBin.HIGH


# ---------------------------------------------------------------- features


@dataclass
class TropeFeatureMatrix:
    row_ids: list[str]
    col_ids: list[str]
    bits: sp.csr_matrix

    def __post_init__(self):
        self.bits = sp.csr_matrix(self.bits, dtype=np.float64)
        if self.bits.shape != (len(self.row_ids), len(self.col_ids)):
            raise ValueError(f"bits shape {self.bits.shape} does not match ids")
        if len(set(self.row_ids)) != len(self.row_ids) or len(set(self.col_ids)) != len(self.col_ids):
            raise ValueError("row and column ids must be unique")

    @property
    def shape(self):
        return self.bits.shape

    def dense(self) -> np.ndarray:
        return self.bits.toarray().astype(np.uint8)

    def triplets(self) -> list[tuple[int, int]]:
        coo = self.bits.tocoo()
        return sorted(zip(coo.row.tolist(), coo.col.tolist()))

    def save(self, directory: str | Path, prefix: str = "features") -> None:
        from .jsonl import atomic_open

        directory = Path(directory)
        with atomic_open(directory / f"{prefix}.tsv") as fh:
            fh.write("row\tcol\tvalue\n")
            for r, c in self.triplets():
                fh.write(f"{r}\t{c}\t1\n")
        with atomic_open(directory / f"{prefix}_rows.txt") as fh:
            fh.writelines(f"{r}\n" for r in self.row_ids)
        with atomic_open(directory / f"{prefix}_cols.txt") as fh:
            fh.writelines(f"{c}\n" for c in self.col_ids)

    @classmethod
    def load(cls, directory: str | Path, prefix: str = "features") -> "TropeFeatureMatrix":
        directory = Path(directory)
        rows = (directory / f"{prefix}_rows.txt").read_text(encoding="utf-8").splitlines()
        cols = (directory / f"{prefix}_cols.txt").read_text(encoding="utf-8").splitlines()
        r_idx, c_idx = [], []
        for line in (directory / f"{prefix}.tsv").read_text(encoding="utf-8").splitlines()[1:]:
            r, c, _ = line.split("\t")
            r_idx.append(int(r))
            c_idx.append(int(c))
        bits = sp.csr_matrix((np.ones(len(r_idx)), (r_idx, c_idx)), shape=(len(rows), len(cols)))
        return cls(rows, cols, bits)


def build_matrix(entity_examples: Mapping[str, Sequence[str]], min_examples: int = 10,
                 trope_counts: Mapping[str, int] | None = None) -> TropeFeatureMatrix:
    """Binary entity-by-trope presence matrix.

    ``entity_examples`` maps an entity (work or author) to the trope id of
    each of its examples. Rows keep entities with at least ``min_examples``
    examples; columns keep tropes with at least ``min_examples`` examples in
    ``trope_counts`` (default: counted from ``entity_examples``) that occur in
    some kept row.
    """
    if trope_counts is None:
        trope_counts = Counter(t for ts in entity_examples.values() for t in ts)
    rows = sorted(e for e, ts in entity_examples.items() if len(ts) >= min_examples)
    eligible = {t for t, n in trope_counts.items() if n >= min_examples}
    used = sorted({t for e in rows for t in entity_examples[e] if t in eligible})
    if not rows or not used:
        raise InsufficientData(f"empty feature matrix ({len(rows)} rows, {len(used)} tropes) at min_examples={min_examples}")
    col = {t: j for j, t in enumerate(used)}
    r_idx, c_idx = [], []
    for i, e in enumerate(rows):
        for j in sorted({col[t] for t in entity_examples[e] if t in col}):
            r_idx.append(i)
            c_idx.append(j)
    bits = sp.csr_matrix((np.ones(len(r_idx)), (r_idx, c_idx)), shape=(len(rows), len(used)))
    return TropeFeatureMatrix(rows, used, bits)


# ---------------------------------------------------------------- model


@dataclass
class LogRegModel:
    classes: list[str]
    weights: np.ndarray
    bias: np.ndarray
    C: float
    seed: int
    feature_ids: list[str] = field(default_factory=list)
    converged: bool = True
    n_iter: int = 0

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X @ self.weights.T) + self.bias

    def predict_proba(self, X) -> np.ndarray:
        return _softmax(self.decision_function(X))

    def predict(self, X) -> list[str]:
        return [self.classes[k] for k in np.argmax(self.decision_function(X), axis=1)]


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def logreg_loss_grad(params: np.ndarray, X, y: np.ndarray, n_classes: int, C: float) -> tuple[float, np.ndarray]:
    """Regularized cross-entropy and its gradient; ``params`` is ``[W.ravel(), b]``."""
    n_features = X.shape[1]
    W = params[: n_classes * n_features].reshape(n_classes, n_features)
    b = params[n_classes * n_features:]
    z = np.asarray(X @ W.T) + b
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    n = z.shape[0]
    loss = float(np.sum(lse - z[np.arange(n), y])) + float(np.sum(W * W)) / (2.0 * C)
    P = np.exp(z - lse[:, None])
    P[np.arange(n), y] -= 1.0
    grad_W = np.asarray(X.T @ P).T + W / C
    grad_b = P.sum(axis=0)
    return loss, np.concatenate([grad_W.ravel(), grad_b])


def fit_logreg(X, labels: Sequence, C: float = 1.0, classes: Sequence[str] | None = None, seed: int = 0,
               gtol: float = 1e-6, max_iter: int = 500, feature_ids: Sequence[str] | None = None) -> LogRegModel:
    labels = [str(getattr(l, "value", l)) for l in labels]
    classes = sorted(set(labels)) if classes is None else list(classes)
    if len(set(classes)) < 2:
        raise DegenerateLabels(f"need at least two classes, got {classes}")
    index = {c: k for k, c in enumerate(classes)}
    y = np.asarray([index[l] for l in labels], dtype=np.int64)
    K, P = len(classes), X.shape[1]
    result = lbfgs(lambda w: logreg_loss_grad(w, X, y, K, C), np.zeros(K * P + K), gtol=gtol, max_iter=max_iter)
    if not result.converged:
        warnings.warn(f"logistic regression did not converge in {result.n_iter} iterations "
                      f"(max|grad| = {np.max(np.abs(result.grad)):.3g}; {result.message})", ConvergenceWarning)
    return LogRegModel(
        classes=classes,
        weights=result.x[: K * P].reshape(K, P).copy(),
        bias=result.x[K * P:].copy(),
        C=C,
        seed=seed,
        feature_ids=list(feature_ids) if feature_ids is not None else [],
        converged=result.converged,
        n_iter=result.n_iter,
    )


@dataclass
class TrainResult:
    model: LogRegModel
    test_accuracy: float
    majority_baseline: float
    train_ids: list[str]
    test_ids: list[str]
    test_predictions: list[str]
    test_labels: list[str]

    def __iter__(self):
        return iter((self.model, self.test_accuracy, self.majority_baseline))


def split_rows(row_ids: Sequence[str], train_frac: float = 0.8, seed: int = 0) -> tuple[list[str], list[str]]:
    """Seeded plain shuffle over rows in id order; returns (train ids, test ids)."""
    if not 0.0 < train_frac < 1.0:
        raise ValueError("train_frac must be in (0, 1)")
    ids = sorted(row_ids)
    n = len(ids)
    if n < 2:
        raise InsufficientData("need at least two rows to split")
    n_train = min(max(int(round(train_frac * n)), 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    return [ids[i] for i in perm[:n_train]], [ids[i] for i in perm[n_train:]]


def train_logreg(matrix: TropeFeatureMatrix, labels: Mapping[str, object] | Sequence, C: float = 1.0,
                 train_frac: float = 0.8, seed: int = 0, max_iter: int = 500) -> TrainResult:
    """Fit on a seeded 80/20 (by default) split and score the held-out rows.

    ``labels`` is either a mapping from row id or a sequence aligned with
    ``matrix.row_ids``.
    """
    if isinstance(labels, Mapping):
        label_of = {r: str(getattr(labels[r], "value", labels[r])) for r in matrix.row_ids}
    else:
        if len(labels) != len(matrix.row_ids):
            raise ValueError("labels must align with matrix rows")
        label_of = {r: str(getattr(l, "value", l)) for r, l in zip(matrix.row_ids, labels)}
    classes = sorted(set(label_of.values()))
    if len(classes) < 2:
        raise DegenerateLabels(f"only one class present: {classes}")

    train_ids, test_ids = split_rows(matrix.row_ids, train_frac, seed)
    pos = {r: i for i, r in enumerate(matrix.row_ids)}
    X = matrix.bits
    X_train = X[[pos[r] for r in train_ids]]
    X_test = X[[pos[r] for r in test_ids]]
    model = fit_logreg(X_train, [label_of[r] for r in train_ids], C=C, classes=classes, seed=seed,
                       max_iter=max_iter, feature_ids=matrix.col_ids)
    preds = model.predict(X_test)
    gold = [label_of[r] for r in test_ids]
    accuracy = sum(p == t for p, t in zip(preds, gold)) / len(gold)
    baseline = Counter(gold).most_common(1)[0][1] / len(gold)
    return TrainResult(model, accuracy, baseline, train_ids, test_ids, preds, gold)


# ---------------------------------------------------------------- analysis


@dataclass(frozen=True)
class FeatureReport:
    label: str
    top_tropes: list[tuple[str, float, float | None]]
    mean_abs_g: float | None
    mean_g: float | None


def top_features(model: LogRegModel, label, k: int, reports: Iterable[GenderednessReport] | Mapping[str, float]) -> FeatureReport:
    """The ``k`` features with the largest weight toward ``label`` and their genderedness.

    Means are taken over the listed tropes that have a score.
    """
    label = str(getattr(label, "value", label))
    g = dict(reports) if isinstance(reports, Mapping) else {r.trope_id: r.g for r in reports}
    w = model.weights[model.classes.index(label)]
    ranked = sorted(range(len(w)), key=lambda j: (-w[j], model.feature_ids[j]))[:k]
    top = [(model.feature_ids[j], float(w[j]), g.get(model.feature_ids[j])) for j in ranked]
    scores = [s for _, _, s in top if s is not None]
    mean_abs = math.fsum(abs(s) for s in scores) / len(scores) if scores else None
    mean = math.fsum(scores) / len(scores) if scores else None
    return FeatureReport(label, top, mean_abs, mean)


def gendered_usage_counts(author_examples: Mapping[str, Sequence[str]], author_labels: Mapping[str, object],
                          reports: Iterable[GenderednessReport] | Mapping[str, float],
                          threshold: float = 1.0) -> dict[str, dict[str, int]]:
    """Per author-gender group: example occurrences of tropes with ``g > threshold`` and ``g < -threshold``."""
    g = dict(reports) if isinstance(reports, Mapping) else {r.trope_id: r.g for r in reports}
    out: dict[str, dict[str, int]] = defaultdict(lambda: {"examples": 0, "high_female": 0, "high_male": 0})
    for author, tropes in author_examples.items():
        if author not in author_labels:
            continue
        group = out[str(getattr(author_labels[author], "value", author_labels[author]))]
        for t in tropes:
            group["examples"] += 1
            score = g.get(t)
            if score is None:
                continue
            if score > threshold:
                group["high_female"] += 1
            elif score < -threshold:
                group["high_male"] += 1
    return {k: out[k] for k in sorted(out)}


@dataclass
class AuthorTaskResult(TrainResult):
    usage: dict = field(default_factory=dict)


def author_gender_task(matrix: TropeFeatureMatrix, labels: Mapping[str, object],
                       author_examples: Mapping[str, Sequence[str]],
                       reports: Iterable[GenderednessReport] | Mapping[str, float], C: float = 1.0,
                       train_frac: float = 0.8, seed: int = 0, threshold: float = 1.0) -> AuthorTaskResult:
    """Author-gender classifier over author rows, plus gendered-trope usage per group."""
    reports = dict(reports) if isinstance(reports, Mapping) else {r.trope_id: r.g for r in reports}
    res = train_logreg(matrix, labels, C=C, train_frac=train_frac, seed=seed)
    usage = gendered_usage_counts(author_examples, labels, reports, threshold)
    return AuthorTaskResult(res.model, res.test_accuracy, res.majority_baseline, res.train_ids, res.test_ids,
                            res.test_predictions, res.test_labels, usage)

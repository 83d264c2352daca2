"""LDA over highly-gendered trope documents and per-topic gender ratios.

Training is collapsed Gibbs sampling. All randomness comes from one
``numpy.random.Generator`` seeded by the caller: topic assignments are
initialised from it and every sweep draws one uniform per token from it,
so a fixed seed gives bit-identical models.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InsufficientData
from .lexicon import Lemmatizer, data_path, tokenize_lemmatize
from .scoring import GenderednessReport, TropeDocument

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    path = data_path("stopwords.txt") if path is None else path
    words = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip().lower()
        if line and not line.startswith("#"):
            words.add(line)
    return frozenset(words)


def select_training_set(documents: Sequence[TropeDocument], reports: Iterable[GenderednessReport],
                        min_tokens: int = 1000, subset_size: int = 3000) -> list[TropeDocument]:
    """Keep documents with at least ``min_tokens`` tokens, then the most male and most female half each.

    Returned order: the ``subset_size // 2`` lowest-``g`` documents (most
    male first) followed by the highest-``g`` ones (most female last).
    """
    if subset_size < 2:
        raise ValueError("subset_size must be at least 2")
    g = {r.trope_id: r.g for r in reports if r.scored}
    pool = [d for d in documents if d.n_tokens >= min_tokens and d.trope_id in g]
    if len(pool) < subset_size:
        raise InsufficientData(
            f"only {len(pool)} scored documents have >= {min_tokens} tokens; need {subset_size}"
        )
    pool.sort(key=lambda d: (g[d.trope_id], d.trope_id))
    half = subset_size // 2
    return pool[:half] + pool[len(pool) - (subset_size - half):]


@dataclass
class LdaModel:
    K: int
    vocab: list[str]
    phi: np.ndarray
    theta: np.ndarray
    seed: int
    doc_ids: list[str] = field(default_factory=list)
    alpha: float = 0.0
    beta: float = 0.0
    iterations: int = 0

    def top_terms(self, topic: int, n: int = 10) -> list[str]:
        order = np.argsort(-self.phi[topic], kind="stable")[:n]
        return [self.vocab[i] for i in order]

    def dominant_topics(self) -> np.ndarray:
        # np.argmax returns the first maximum, i.e. the lowest topic index on ties
        return np.argmax(self.theta, axis=1)


def build_vocabulary(token_lists: Sequence[Sequence[str]], stopwords: frozenset[str], min_df: int = 2) -> list[str]:
    df = Counter()
    for toks in token_lists:
        df.update({t for t in toks if t not in stopwords})
    return sorted(t for t, n in df.items() if n >= min_df)


@njit(cache=True)
def _init_counts(words, doc_of, z, ndk, nwk, nk):
    for i in range(words.shape[0]):
        ndk[doc_of[i], z[i]] += 1
        nwk[words[i], z[i]] += 1
        nk[z[i]] += 1


@njit(cache=True)
def _gibbs_sweep(words, doc_of, z, ndk, nwk, nk, alpha, beta, vbeta, u, cum):
    K = nk.shape[0]
    for i in range(words.shape[0]):
        w = words[i]
        d = doc_of[i]
        k = z[i]
        ndk[d, k] -= 1
        nwk[w, k] -= 1
        nk[k] -= 1
        total = 0.0
        for t in range(K):
            total += (ndk[d, t] + alpha) * (nwk[w, t] + beta) / (nk[t] + vbeta)
            cum[t] = total
        target = u[i] * total
        k = 0
        while k < K - 1 and cum[k] <= target:
            k += 1
        z[i] = k
        ndk[d, k] += 1
        nwk[w, k] += 1
        nk[k] += 1


def train_lda(documents: Sequence[TropeDocument], K: int = 75, alpha: float | None = None, beta: float = 0.01,
              iterations: int = 1000, seed: int = 0, stopwords: frozenset[str] | None = None, min_df: int = 2,
              lemmatizer: Lemmatizer | None = None) -> LdaModel:
    """Fit LDA by collapsed Gibbs sampling; ``alpha`` defaults to ``50 / K``.

    Documents are processed in trope-id order internally, so reordering the
    input only reorders the rows of ``theta``.
    """
    if K < 2:
        raise ValueError("K must be at least 2")
    if not documents:
        raise InsufficientData("no documents to model")
    alpha = 50.0 / K if alpha is None else float(alpha)
    stopwords = load_stopwords() if stopwords is None else stopwords

    order = sorted(range(len(documents)), key=lambda i: documents[i].trope_id)
    token_lists = [tokenize_lemmatize(documents[i].text, lemmatizer) for i in order]
    vocab = build_vocabulary(token_lists, stopwords, min_df)
    if not vocab:
        raise InsufficientData("empty vocabulary after stopword and document-frequency filtering")
    index = {t: j for j, t in enumerate(vocab)}

    words, doc_of = [], []
    for d, toks in enumerate(token_lists):
        for t in toks:
            j = index.get(t)
            if j is not None:
                words.append(j)
                doc_of.append(d)
    words = np.asarray(words, dtype=np.int64)
    doc_of = np.asarray(doc_of, dtype=np.int64)
    D, V, N = len(token_lists), len(vocab), len(words)

    rng = np.random.default_rng(seed)
    z = rng.integers(0, K, size=N, dtype=np.int64)
    ndk = np.zeros((D, K), dtype=np.int64)
    nwk = np.zeros((V, K), dtype=np.int64)
    nk = np.zeros(K, dtype=np.int64)
    _init_counts(words, doc_of, z, ndk, nwk, nk)
    cum = np.zeros(K, dtype=np.float64)
    for _ in range(iterations):
        u = rng.random(N)
        _gibbs_sweep(words, doc_of, z, ndk, nwk, nk, alpha, beta, V * beta, u, cum)

    phi = (nwk.T + beta) / (nk[:, None] + V * beta)
    theta_sorted = (ndk + alpha) / (ndk.sum(axis=1, keepdims=True) + K * alpha)
    theta = np.empty_like(theta_sorted)
    theta[np.asarray(order, dtype=np.int64)] = theta_sorted
    return LdaModel(K, vocab, phi, theta, seed, [doc.trope_id for doc in documents], alpha, beta, iterations)


@dataclass(frozen=True)
class TopicGenderProfile:
    topic_id: int
    n_female: int
    n_male: int
    n_assigned: int
    top_terms: tuple[str, ...]

    @property
    def ratio(self) -> float | None:
        """Female-leaning over male-leaning count; ``inf`` with no male tropes, ``None`` if both are zero."""
        if self.n_male:
            return self.n_female / self.n_male
        return math.inf if self.n_female else None

    @property
    def skew(self) -> str:
        if self.n_female > self.n_male:
            return "female"
        if self.n_male > self.n_female:
            return "male"
        return "empty" if self.n_female == 0 else "balanced"


def topic_gender_profiles(model: LdaModel, reports: Iterable[GenderednessReport] | Mapping[str, float],
                          n_terms: int = 10) -> list[TopicGenderProfile]:
    if isinstance(reports, Mapping):
        g = dict(reports)
    else:
        g = {r.trope_id: r.g for r in reports}
    missing = [t for t in model.doc_ids if t not in g]
    if missing:
        raise ValueError(f"no genderedness report for modeled tropes {missing[:5]}")
    dominant = model.dominant_topics()
    female = np.zeros(model.K, dtype=int)
    male = np.zeros(model.K, dtype=int)
    assigned = np.zeros(model.K, dtype=int)
    for trope_id, k in zip(model.doc_ids, dominant):
        assigned[k] += 1
        score = g[trope_id]
        if score is None or score == 0:
            continue
        if score > 0:
            female[k] += 1
        else:
            male[k] += 1
    return [
        TopicGenderProfile(k, int(female[k]), int(male[k]), int(assigned[k]), tuple(model.top_terms(k, n_terms)))
        for k in range(model.K)
    ]


def skew_summary(profiles: Iterable[TopicGenderProfile]) -> dict[str, int]:
    counts = Counter(p.skew for p in profiles)
    return {key: counts.get(key, 0) for key in ("male", "female", "balanced", "empty")}

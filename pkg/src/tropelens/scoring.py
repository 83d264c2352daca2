"""Per-trope genderedness scores, example classification and lexicon validation.

For trope document ``i`` with male/female lexicon counts ``m_i``, ``f_i``::

    r_i = f_i / (f_i + m_i)
    d_i = r_i / r_corpus,      r_corpus = F / (F + M) over all documents
    g_i = (d_i - mean(d)) / popstd(d)

Tropes without any gendered token are unscored and sit outside the
z-score population.
"""

from __future__ import annotations

import enum
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .errors import DegenerateCorpus, EvalError
from .ingest.records import Corpus, Example, Trope
from .lexicon import (
    GenderCounts,
    GenderLexicon,
    Lemmatizer,
    count_gendered,
    split_camel_case,
    tokenize_lemmatize,
)


class GenderLabel(str, enum.Enum):
    MALE = "Male"
    FEMALE = "Female"
    NA = "NA"


@dataclass(frozen=True)
class TropeDocument:
    trope_id: str
    text: str
    n_tokens: int


@dataclass(frozen=True)
class CorpusGenderStats:
    m_total: int
    f_total: int
    r_corpus: float


@dataclass(frozen=True)
class GenderednessReport:
    trope_id: str
    m: int
    f: int
    r: float | None = None
    d: float | None = None
    g: float | None = None

    @property
    def scored(self) -> bool:
        return self.g is not None


@dataclass(frozen=True)
class ExampleGenderLabel:
    example_id: str
    predicted: GenderLabel


def build_documents(corpus: Corpus, lemmatizer: Lemmatizer | None = None) -> list[TropeDocument]:
    """One document per trope: description followed by its examples in id order."""
    by_trope = corpus.examples_by_trope()
    docs = []
    for trope in corpus.tropes:
        parts = [trope.description] if trope.description.strip() else []
        parts.extend(ex.text for ex in by_trope.get(trope.trope_id, ()))
        text = " ".join(parts)
        docs.append(TropeDocument(trope.trope_id, text, len(tokenize_lemmatize(text, lemmatizer))))
    return docs


def count_documents(documents: Iterable[TropeDocument], lexicon: GenderLexicon,
                    lemmatizer: Lemmatizer | None = None, count_mode: str = "tokens") -> dict[str, GenderCounts]:
    return {
        doc.trope_id: count_gendered(tokenize_lemmatize(doc.text, lemmatizer), lexicon, count_mode)
        for doc in documents
    }


def score_counts(counts: Mapping[str, GenderCounts]) -> tuple[CorpusGenderStats, list[GenderednessReport]]:
    """Score a ``trope_id -> (m, f)`` table; reports come back sorted by trope id."""
    m_total = sum(c.m for c in counts.values())
    f_total = sum(c.f for c in counts.values())
    if m_total + f_total == 0:
        raise DegenerateCorpus("no trope document contains a gendered token")
    if f_total == 0:
        raise DegenerateCorpus("corpus contains no female-lexicon tokens; r_corpus is 0")
    r_corpus = f_total / (f_total + m_total)

    ids = sorted(counts)
    scored = [t for t in ids if counts[t].m + counts[t].f > 0]
    r = {t: counts[t].f / (counts[t].f + counts[t].m) for t in scored}
    d = {t: r[t] / r_corpus for t in scored}

    values = [d[t] for t in scored]
    if max(values) == min(values):
        g = {t: 0.0 for t in scored}
    else:
        n = len(values)
        mean = math.fsum(values) / n
        std = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / n)
        g = {t: (d[t] - mean) / std for t in scored}

    reports = []
    for t in ids:
        c = counts[t]
        if t in d:
            reports.append(GenderednessReport(t, c.m, c.f, r[t], d[t], g[t]))
        else:
            reports.append(GenderednessReport(t, c.m, c.f))
    return CorpusGenderStats(m_total, f_total, r_corpus), reports


def score_corpus(documents: Sequence[TropeDocument], lexicon: GenderLexicon, lemmatizer: Lemmatizer | None = None,
                 count_mode: str = "tokens") -> tuple[CorpusGenderStats, list[GenderednessReport]]:
    return score_counts(count_documents(documents, lexicon, lemmatizer, count_mode))


def label_from_counts(counts: GenderCounts) -> GenderLabel:
    if counts.m > counts.f:
        return GenderLabel.MALE
    if counts.f > counts.m:
        return GenderLabel.FEMALE
    return GenderLabel.NA


def classify_example(example: Example, lexicon: GenderLexicon, lemmatizer: Lemmatizer | None = None,
                     count_mode: str = "tokens") -> ExampleGenderLabel:
    counts = count_gendered(tokenize_lemmatize(example.text, lemmatizer), lexicon, count_mode)
    return ExampleGenderLabel(example.example_id, label_from_counts(counts))


def _as_label_map(items, what: str) -> dict[str, GenderLabel]:
    out: dict[str, GenderLabel] = {}
    if isinstance(items, Mapping):
        pairs = items.items()
    else:
        pairs = []
        for it in items:
            if isinstance(it, ExampleGenderLabel):
                pairs.append((it.example_id, it.predicted))
            else:
                pairs.append((it["example_id"], it["label"]))
    for example_id, label in pairs:
        if example_id in out:
            raise EvalError(f"duplicate {what} label for {example_id}")
        try:
            out[example_id] = GenderLabel(label)
        except ValueError:
            raise EvalError(f"invalid {what} label {label!r} for {example_id}") from None
    return out


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def evaluate_lexicon(predictions, gold) -> dict[str, dict[str, float]]:
    """Per-class precision/recall/F1 for Male and Female, one-vs-rest.

    NA is never a positive class. Zero denominators give 0.0.
    """
    pred = _as_label_map(predictions, "predicted")
    truth = _as_label_map(gold, "gold")
    if set(pred) != set(truth):
        missing, extra = sorted(set(truth) - set(pred)), sorted(set(pred) - set(truth))
        raise EvalError(f"prediction/gold id mismatch: missing={missing[:5]} extra={extra[:5]}")
    out = {}
    for cls in (GenderLabel.MALE, GenderLabel.FEMALE):
        tp = sum(1 for k in truth if truth[k] is cls and pred[k] is cls)
        fp = sum(1 for k in truth if truth[k] is not cls and pred[k] is cls)
        fn = sum(1 for k in truth if truth[k] is cls and pred[k] is not cls)
        p, r = _safe_div(tp, tp + fp), _safe_div(tp, tp + fn)
        out[cls.value] = {
            "precision": p,
            "recall": r,
            "f1": _safe_div(2 * p * r, p + r),
            "support": tp + fn,
        }
    return out


@dataclass(frozen=True)
class GenreScore:
    genre: str
    mean_g: float
    n_tropes: int


def work_tropes(corpus: Corpus) -> dict[str, set[str]]:
    out: dict[str, set[str]] = defaultdict(set)
    for ex in corpus.examples:
        out[ex.work_id].add(ex.trope_id)
    return dict(out)


def genre_genderedness(work_genres: Mapping[str, Iterable[str]], tropes_of_work: Mapping[str, Iterable[str]],
                       reports: Iterable[GenderednessReport]) -> dict[str, GenreScore]:
    """Mean ``g`` over the distinct scored tropes used by any work of each genre."""
    g = {r.trope_id: r.g for r in reports if r.scored}
    members: dict[str, set[str]] = defaultdict(set)
    for work_id, genres in work_genres.items():
        used = [t for t in tropes_of_work.get(work_id, ()) if t in g]
        for genre in genres:
            members[genre].update(used)
    return {
        genre: GenreScore(genre, math.fsum(g[t] for t in ts) / len(ts), len(ts))
        for genre, ts in sorted(members.items())
        if ts
    }


def title_tokens(title: str, lemmatizer: Lemmatizer | None = None) -> list[str]:
    return tokenize_lemmatize(split_camel_case(title), lemmatizer)


def implicit_gendered_tropes(reports: Iterable[GenderednessReport], tropes: Iterable[Trope], lexicon: GenderLexicon,
                             threshold: float = 1.0, lemmatizer: Lemmatizer | None = None) -> list[str]:
    """Tropes with ``|g| > threshold`` whose title contains no lexicon term, by descending ``|g|``."""
    titles = {t.trope_id: t.title for t in tropes}
    terms = lexicon.terms
    picked = []
    for rep in reports:
        if not rep.scored or abs(rep.g) <= threshold or rep.trope_id not in titles:
            continue
        if any(tok in terms for tok in title_tokens(titles[rep.trope_id], lemmatizer)):
            continue
        picked.append(rep)
    picked.sort(key=lambda r: (-abs(r.g), r.trope_id))
    return [r.trope_id for r in picked]

"""Gendered lexicon loading, tokenization/lemmatization and gendered-token counting."""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import LexiconError

COUNT_MODES = ("tokens", "types")

# alphabetic runs with internal apostrophes; digits and underscores excluded
_WORD_RE = re.compile(r"[^\W\d_]+(?:'[^\W\d_]+)*")
_APOSTROPHES = str.maketrans({"’": "'", "‘": "'", "ʼ": "'"})
_CAMEL_RE = re.compile(r"(?<=[a-z])(?=[A-Z])|(?<=[A-Z])(?=[A-Z][a-z])")


def data_path(name: str) -> Path:
    """Path of a file bundled in ``tropelens/data``."""
    return Path(str(resources.files("tropelens") / "data" / name))


def _read_tsv_rows(path: str | Path) -> list[tuple[int, list[str]]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\r\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            rows.append((lineno, [c.strip() for c in line.split("\t")]))
    return rows


@dataclass(frozen=True)
class GenderLexicon:
    pairs: tuple[tuple[str, str], ...]
    male_set: frozenset[str] = field(init=False)
    female_set: frozenset[str] = field(init=False)

    def __post_init__(self):
        if not self.pairs:
            raise LexiconError("lexicon has no pairs")
        for male, female in self.pairs:
            for term in (male, female):
                if not term or term != term.lower() or len(term.split()) != 1:
                    raise LexiconError(f"lexicon terms must be lower-case single tokens: {term!r}")
        male_set = frozenset(m for m, _ in self.pairs)
        female_set = frozenset(f for _, f in self.pairs)
        overlap = male_set & female_set
        if overlap:
            raise LexiconError(f"terms listed for both genders: {sorted(overlap)}")
        object.__setattr__(self, "male_set", male_set)
        object.__setattr__(self, "female_set", female_set)

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[str]]) -> "GenderLexicon":
        seen: dict[tuple[str, str], None] = {}
        for male, female in pairs:
            seen.setdefault((male.lower(), female.lower()), None)
        return cls(tuple(seen))

    def swapped(self) -> "GenderLexicon":
        return GenderLexicon(tuple((f, m) for m, f in self.pairs))

    @property
    def terms(self) -> frozenset[str]:
        return self.male_set | self.female_set

    def __len__(self):
        return len(self.pairs)


def load_lexicon(path: str | Path | None = None) -> GenderLexicon:
    """Read a ``male<TAB>female`` pair file; ``#`` lines are comments.

    Duplicate pairs are dropped. A term appearing on both sides raises
    :class:`LexiconError`, as does a file with no pairs.
    """
    path = data_path("lexicon.tsv") if path is None else path
    pairs = []
    for lineno, cols in _read_tsv_rows(path):
        if len(cols) != 2 or not all(cols):
            raise LexiconError(f"{path}:{lineno}: expected 'male<TAB>female'")
        pairs.append((cols[0], cols[1]))
    if not pairs:
        raise LexiconError(f"{path}: empty lexicon")
    return GenderLexicon.from_pairs(pairs)


class Lemmatizer:
    """Dictionary lemmatizer (inflected form -> lemma) with identity fallback.

    Chains in the table are resolved at construction so that applying the
    lemmatizer twice is the same as applying it once.
    """

    def __init__(self, table: Mapping[str, str] | None = None):
        table = {k.lower(): v.lower() for k, v in (table or {}).items()}
        resolved = {}
        for form in table:
            lemma, hops = form, 0
            while lemma in table and table[lemma] != lemma:
                lemma = table[lemma]
                hops += 1
                if hops > len(table):
                    raise LexiconError(f"cyclic lemma entries starting at {form!r}")
            resolved[form] = lemma
        self.table = {k: v for k, v in resolved.items() if k != v}

    @classmethod
    def load(cls, path: str | Path | None = None) -> "Lemmatizer":
        path = data_path("lemmas.tsv") if path is None else path
        table = {}
        for lineno, cols in _read_tsv_rows(path):
            if len(cols) != 2 or not all(cols):
                raise LexiconError(f"{path}:{lineno}: expected 'form<TAB>lemma'")
            table[cols[0]] = cols[1]
        return cls(table)

    def __call__(self, token: str) -> str:
        return self.table.get(token, token)

    def __len__(self):
        return len(self.table)


_default_lemmatizer: Lemmatizer | None = None


def default_lemmatizer() -> Lemmatizer:
    global _default_lemmatizer
    if _default_lemmatizer is None:
        _default_lemmatizer = Lemmatizer.load()
    return _default_lemmatizer


def tokenize(text: str) -> list[str]:
    text = unicodedata.normalize("NFC", text).translate(_APOSTROPHES).lower()
    return _WORD_RE.findall(text)


def tokenize_lemmatize(text: str, lemmatizer: Lemmatizer | None = None) -> list[str]:
    """Lower-cased word tokens mapped through ``lemmatizer``.

    >>> tokenize_lemmatize("He—he!")
    ['he', 'he']
    """
    lemma = lemmatizer if lemmatizer is not None else default_lemmatizer()
    return [lemma(t) for t in tokenize(text)]


def split_camel_case(title: str) -> str:
    """``"WomenAreWiser"`` -> ``"Women Are Wiser"``; spaced titles pass through."""
    if " " in title.strip():
        return title
    return _CAMEL_RE.sub(" ", title)


@dataclass(frozen=True)
class GenderCounts:
    m: int = 0
    f: int = 0

    def __add__(self, other: "GenderCounts") -> "GenderCounts":
        return GenderCounts(self.m + other.m, self.f + other.f)


def count_gendered(tokens: Sequence[str], lexicon: GenderLexicon, mode: str = "tokens") -> GenderCounts:
    """Count male- and female-lexicon matches in an already lemmatized stream.

    ``mode="tokens"`` counts occurrences with multiplicity; ``mode="types"``
    counts distinct matched terms instead.
    """
    if mode == "types":
        tokens = set(tokens)
    elif mode != "tokens":
        raise ValueError(f"unknown count mode {mode!r}; expected one of {COUNT_MODES}")
    m = f = 0
    male, female = lexicon.male_set, lexicon.female_set
    for tok in tokens:
        if tok in male:
            m += 1
        elif tok in female:
            f += 1
    return GenderCounts(m, f)

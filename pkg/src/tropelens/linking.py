"""Record linkage of corpus works against external metadata catalogs.

Matching is exact on normalized titles, optionally constrained by release
year. Ambiguous candidates are left unmatched rather than resolved
arbitrarily.
"""

from __future__ import annotations

import csv
import enum
import re
import unicodedata
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import SchemaError

_LEADING_ARTICLE = re.compile(r"^(?:the|a|an)\s+(?=\S)")
_WS = re.compile(r"\s+")
# dashes and slashes separate words; other punctuation and symbols vanish
_SEPARATORS = set("/\\")


class MatchKind(str, enum.Enum):
    EXACT_TITLE_YEAR = "ExactTitleYear"
    EXACT_TITLE_NO_YEAR = "ExactTitleNoYear"
    NONE = "None"


class AuthorGender(str, enum.Enum):
    MALE = "Male"
    FEMALE = "Female"


def normalize_title(title: str) -> str:
    """Canonical form used for title matching and work ids.

    >>> normalize_title("The Matrix ")
    'matrix'
    >>> normalize_title("Harry Potter & the Goblet of Fire")
    'harry potter the goblet of fire'
    """
    text = unicodedata.normalize("NFC", title).lower()
    out = []
    for ch in text:
        cat = unicodedata.category(ch)
        if cat == "Pd" or ch in _SEPARATORS:
            out.append(" ")
        elif cat[0] in "PS":
            continue
        else:
            out.append(ch)
    text = _WS.sub(" ", "".join(out)).strip()
    return _LEADING_ARTICLE.sub("", text)


@dataclass(frozen=True)
class CatalogRecord:
    catalog_id: str
    title: str
    year: int | None = None
    genres: tuple[str, ...] = ()
    rating: float | None = None
    author: str | None = None
    author_gender: AuthorGender | None = None

    def __post_init__(self):
        if not self.catalog_id:
            raise ValueError("catalog_id must be non-empty")
        if self.rating is not None and not 0.0 <= self.rating <= 10.0:
            raise ValueError(f"rating {self.rating} outside [0, 10] for {self.catalog_id}")
        if self.author_gender is not None and self.author is None:
            raise ValueError(f"author_gender without author for {self.catalog_id}")

    def to_json(self) -> dict:
        return {
            "catalog_id": self.catalog_id,
            "title": self.title,
            "year": self.year,
            "genres": list(self.genres),
            "rating": self.rating,
            "author": self.author,
            "author_gender": self.author_gender.value if self.author_gender else None,
        }

    @classmethod
    def from_json(cls, obj: Mapping) -> "CatalogRecord":
        gender = obj.get("author_gender")
        return cls(
            catalog_id=str(obj["catalog_id"]),
            title=str(obj["title"]),
            year=None if obj.get("year") is None else int(obj["year"]),
            genres=tuple(str(g) for g in obj.get("genres") or ()),
            rating=None if obj.get("rating") is None else float(obj["rating"]),
            author=obj.get("author"),
            author_gender=AuthorGender(gender) if gender else None,
        )


@dataclass(frozen=True)
class LinkResult:
    work_id: str
    catalog_id: str | None
    match_kind: MatchKind

    def to_json(self) -> dict:
        return {"work_id": self.work_id, "catalog_id": self.catalog_id, "match_kind": self.match_kind.value}

    @classmethod
    def from_json(cls, obj: Mapping) -> "LinkResult":
        return cls(obj["work_id"], obj.get("catalog_id"), MatchKind(obj["match_kind"]))


@dataclass
class CatalogIndex:
    by_title_year: dict[tuple[str, int | None], list[CatalogRecord]] = field(default_factory=dict)
    by_title: dict[str, list[CatalogRecord]] = field(default_factory=dict)

    @classmethod
    def build(cls, catalog: Iterable[CatalogRecord]) -> "CatalogIndex":
        by_title_year: dict = defaultdict(list)
        by_title: dict = defaultdict(list)
        for rec in sorted(catalog, key=lambda r: r.catalog_id):
            key = normalize_title(rec.title)
            by_title_year[(key, rec.year)].append(rec)
            by_title[key].append(rec)
        return cls(dict(by_title_year), dict(by_title))


def _match_one(title: str, year: int | None, index: CatalogIndex, require_year: bool):
    key = normalize_title(title)
    if year is not None:
        hits = index.by_title_year.get((key, year), [])
        if len(hits) == 1:
            return hits[0].catalog_id, MatchKind.EXACT_TITLE_YEAR
        if len(hits) > 1:
            return None, MatchKind.NONE
    if require_year:
        return None, MatchKind.NONE
    # fall back to title only, but never across two known, differing years
    candidates = [r for r in index.by_title.get(key, []) if year is None or r.year is None]
    if len(candidates) == 1:
        return candidates[0].catalog_id, MatchKind.EXACT_TITLE_NO_YEAR
    return None, MatchKind.NONE


def link_works(works: Sequence, catalog: Iterable[CatalogRecord] | CatalogIndex, require_year: bool = True) -> list[LinkResult]:
    """Link each work to at most one catalog record.

    ``works`` are objects with ``work_id``, ``title``, ``release_year`` and
    ``media_type`` attributes. Output is sorted by ``work_id`` and does not
    depend on input order. If several works of one media type claim the same
    catalog record, year-confirmed links win; any remaining contention
    unmatches all claimants.
    """
    index = catalog if isinstance(catalog, CatalogIndex) else CatalogIndex.build(catalog)
    proposals = {}
    for work in sorted(works, key=lambda w: w.work_id):
        proposals[work.work_id] = (work, *_match_one(work.title, work.release_year, index, require_year))

    claims = defaultdict(list)
    for work_id, (work, catalog_id, kind) in proposals.items():
        if catalog_id is not None:
            claims[(str(work.media_type), catalog_id)].append((work_id, kind))

    rejected = set()
    for claimants in claims.values():
        if len(claimants) == 1:
            continue
        strong = [wid for wid, kind in claimants if kind is MatchKind.EXACT_TITLE_YEAR]
        keep = strong[0] if len(strong) == 1 else None
        rejected.update(wid for wid, _ in claimants if wid != keep)

    links = []
    for work_id, (_, catalog_id, kind) in proposals.items():
        if work_id in rejected:
            catalog_id, kind = None, MatchKind.NONE
        links.append(LinkResult(work_id, catalog_id, kind))
    return links


def coverage_report(links: Iterable[LinkResult], works: Iterable) -> dict[str, int]:
    """Matched-work counts per media type (every media type present in ``works`` appears)."""
    media_of = {w.work_id: str(w.media_type) for w in works}
    counts = {m: 0 for m in sorted(set(media_of.values()))}
    for link in links:
        if link.match_kind is not MatchKind.NONE and link.work_id in media_of:
            counts[media_of[link.work_id]] += 1
    return counts


def load_catalog(path: str | Path) -> list[CatalogRecord]:
    from .jsonl import iter_jsonl

    records = []
    seen = set()
    for lineno, obj in iter_jsonl(path):
        try:
            rec = CatalogRecord.from_json(obj)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad catalog record: {exc}", line=lineno, path=str(path)) from exc
        if rec.catalog_id in seen:
            raise SchemaError(f"duplicate catalog_id {rec.catalog_id}", line=lineno, path=str(path))
        seen.add(rec.catalog_id)
        records.append(rec)
    return records


def load_author_genders(path: str | Path) -> dict[str, AuthorGender]:
    """Read the hand-annotated ``author<TAB>gender`` sidecar (header row required)."""
    labels = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh, delimiter="\t")
        if reader.fieldnames is None or {"author", "gender"} - set(reader.fieldnames):
            raise SchemaError("expected header 'author\\tgender'", line=1, path=str(path))
        for lineno, row in enumerate(reader, start=2):
            try:
                labels[row["author"].strip()] = AuthorGender(row["gender"].strip().capitalize())
            except (ValueError, AttributeError) as exc:
                raise SchemaError(f"bad gender label {row.get('gender')!r}", line=lineno, path=str(path)) from exc
    return labels


def attach_author_genders(catalog: Iterable[CatalogRecord], labels: Mapping[str, AuthorGender]) -> list[CatalogRecord]:
    out = []
    for rec in catalog:
        if rec.author is not None and rec.author in labels:
            rec = CatalogRecord(rec.catalog_id, rec.title, rec.year, rec.genres, rec.rating, rec.author, labels[rec.author])
        out.append(rec)
    return out

"""Corpus record types, the canonical JSONL dataset, and corpus statistics."""

from __future__ import annotations

import enum
import hashlib
import os
import re
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ..errors import SchemaError
from ..jsonl import iter_jsonl, write_jsonl
from ..linking import LinkResult, MatchKind, normalize_title

TROPES_FILE = "tropes.jsonl"
EXAMPLES_FILE = "examples.jsonl"
WORKS_FILE = "works.jsonl"

_WS = re.compile(r"\s+")


class MediaType(str, enum.Enum):
    FILM = "Film"
    TV = "TV"
    LITERATURE = "Literature"

    def __str__(self):
        return self.value


MEDIA_ORDER = (MediaType.LITERATURE, MediaType.FILM, MediaType.TV)


def collapse_ws(text: str) -> str:
    return _WS.sub(" ", text).strip()


def make_work_id(title: str, media_type: MediaType, year: int | None) -> str:
    key = f"{normalize_title(title)}\x1f{MediaType(media_type).value}\x1f{'' if year is None else year}"
    return "w" + hashlib.sha1(key.encode("utf-8")).hexdigest()[:15]


def make_example_id(trope_id: str, index: int) -> str:
    return f"{trope_id}/{index:05d}"


@dataclass(frozen=True)
class Trope:
    trope_id: str
    title: str
    description: str
    example_refs: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.trope_id:
            raise ValueError("trope_id must be non-empty")
        if not self.title.strip():
            raise ValueError(f"trope {self.trope_id} has an empty title")
        object.__setattr__(self, "example_refs", tuple(self.example_refs))

    def to_json(self) -> dict:
        return {
            "trope_id": self.trope_id,
            "title": self.title,
            "description": self.description,
            "example_refs": list(self.example_refs),
        }


@dataclass(frozen=True)
class Example:
    example_id: str
    trope_id: str
    work_id: str
    media_type: MediaType
    text: str

    def __post_init__(self):
        object.__setattr__(self, "media_type", MediaType(self.media_type))
        if not self.example_id:
            raise ValueError("example_id must be non-empty")
        if not collapse_ws(self.text):
            raise ValueError(f"example {self.example_id} has empty text")

    def to_json(self) -> dict:
        return {
            "example_id": self.example_id,
            "trope_id": self.trope_id,
            "work_id": self.work_id,
            "media_type": self.media_type.value,
            "text": self.text,
        }


@dataclass(frozen=True)
class Work:
    work_id: str
    title: str
    media_type: MediaType
    release_year: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "media_type", MediaType(self.media_type))
        if not self.work_id:
            raise ValueError("work_id must be non-empty")

    def to_json(self) -> dict:
        return {
            "work_id": self.work_id,
            "title": self.title,
            "media_type": self.media_type.value,
            "release_year": self.release_year,
        }


@dataclass(frozen=True)
class Corpus:
    """Tropes, examples and works, each held sorted by id."""

    tropes: tuple[Trope, ...] = ()
    examples: tuple[Example, ...] = ()
    works: tuple[Work, ...] = ()
    _examples_by_trope: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "tropes", tuple(sorted(self.tropes, key=lambda t: t.trope_id)))
        object.__setattr__(self, "examples", tuple(sorted(self.examples, key=lambda e: e.example_id)))
        object.__setattr__(self, "works", tuple(sorted(self.works, key=lambda w: w.work_id)))
        _check_unique(self.tropes, "trope_id")
        _check_unique(self.examples, "example_id")
        _check_unique(self.works, "work_id")

    def examples_by_trope(self) -> dict[str, list[Example]]:
        if self._examples_by_trope is None:
            grouped: dict[str, list[Example]] = {t.trope_id: [] for t in self.tropes}
            for ex in self.examples:
                grouped.setdefault(ex.trope_id, []).append(ex)
            object.__setattr__(self, "_examples_by_trope", grouped)
        return self._examples_by_trope

    @property
    def trope_map(self) -> dict[str, Trope]:
        return {t.trope_id: t for t in self.tropes}

    @property
    def work_map(self) -> dict[str, Work]:
        return {w.work_id: w for w in self.works}


def _check_unique(items: Sequence, attr: str) -> None:
    prev = None
    for item in items:
        key = getattr(item, attr)
        if key == prev:
            raise ValueError(f"duplicate {attr} {key!r}")
        prev = key


def build_corpus(parsed: Iterable[tuple[Trope, Sequence[tuple[MediaType, str, str]]]]) -> Corpus:
    """Assign stable ids to parsed pages and assemble a :class:`Corpus`.

    A work title may carry its release year as a trailing ``(YYYY)``.
    """
    tropes, examples, works = {}, [], {}
    for trope, items in parsed:
        if trope.trope_id in tropes:
            raise ValueError(f"trope {trope.trope_id} parsed twice; merge its pages first")
        refs = []
        for i, (media, work_title, text) in enumerate(items):
            title, year = split_title_year(work_title)
            work_id = make_work_id(title, media, year)
            works.setdefault(work_id, Work(work_id, title, media, year))
            example_id = make_example_id(trope.trope_id, i)
            examples.append(Example(example_id, trope.trope_id, work_id, media, collapse_ws(text)))
            refs.append(example_id)
        tropes[trope.trope_id] = Trope(trope.trope_id, trope.title, trope.description, tuple(refs))
    return Corpus(tuple(tropes.values()), tuple(examples), tuple(works.values()))


_TITLE_YEAR = re.compile(r"^(?P<title>.*?)\s*\((?P<year>\d{4})\)\s*$")


def split_title_year(title: str) -> tuple[str, int | None]:
    title = collapse_ws(title)
    m = _TITLE_YEAR.match(title)
    if m and m.group("title"):
        return m.group("title"), int(m.group("year"))
    return title, None


# ---------------------------------------------------------------- dataset I/O


def write_dataset(corpus: Corpus, directory: str | Path) -> None:
    """Write ``tropes.jsonl``, ``examples.jsonl`` and ``works.jsonl`` under ``directory``."""
    validate_corpus(corpus)
    directory = Path(directory)
    directory.parent.mkdir(parents=True, exist_ok=True)
    # build the three files in a sibling directory and swap it in, so readers
    # never see a mix of old and new files
    tmp = Path(tempfile.mkdtemp(prefix=f".{directory.name}.", dir=directory.parent))
    try:
        os.chmod(tmp, 0o755)
        write_jsonl(tmp / TROPES_FILE, (t.to_json() for t in corpus.tropes))
        write_jsonl(tmp / EXAMPLES_FILE, (e.to_json() for e in corpus.examples))
        write_jsonl(tmp / WORKS_FILE, (w.to_json() for w in corpus.works))
        old = None
        if directory.exists():
            old = directory.with_name(tmp.name + ".old")
            os.replace(directory, old)
        os.replace(tmp, directory)
        if old is not None:
            shutil.rmtree(old)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def _required(obj: Mapping, key: str, path, lineno, types=(str,)):
    if key not in obj or obj[key] is None:
        raise SchemaError(f"missing field {key!r}", line=lineno, path=str(path))
    value = obj[key]
    if not isinstance(value, types):
        raise SchemaError(f"field {key!r} has wrong type {type(value).__name__}", line=lineno, path=str(path))
    return value


def _load(path: Path, build):
    out = []
    if not path.exists():
        return out
    for lineno, obj in iter_jsonl(path):
        try:
            out.append((lineno, build(obj, lineno)))
        except SchemaError:
            raise
        except (ValueError, TypeError) as exc:
            raise SchemaError(str(exc), line=lineno, path=str(path)) from exc
    return out


def read_dataset(directory: str | Path) -> Corpus:
    """Load and validate a dataset directory; malformed lines raise :class:`SchemaError`."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {directory}")
    tp, ep, wp = directory / TROPES_FILE, directory / EXAMPLES_FILE, directory / WORKS_FILE

    def trope(obj, ln):
        refs = _required(obj, "example_refs", tp, ln, (list,))
        return Trope(_required(obj, "trope_id", tp, ln), _required(obj, "title", tp, ln),
                     _required(obj, "description", tp, ln), tuple(refs))

    def example(obj, ln):
        return Example(_required(obj, "example_id", ep, ln), _required(obj, "trope_id", ep, ln),
                       _required(obj, "work_id", ep, ln), MediaType(_required(obj, "media_type", ep, ln)),
                       _required(obj, "text", ep, ln))

    def work(obj, ln):
        year = obj.get("release_year")
        if year is not None and (isinstance(year, bool) or not isinstance(year, int)):
            raise SchemaError("release_year must be an integer or null", line=ln, path=str(wp))
        return Work(_required(obj, "work_id", wp, ln), _required(obj, "title", wp, ln),
                    MediaType(_required(obj, "media_type", wp, ln)), year)

    tropes, examples, works = _load(tp, trope), _load(ep, example), _load(wp, work)
    for path, rows, attr in ((tp, tropes, "trope_id"), (ep, examples, "example_id"), (wp, works, "work_id")):
        seen = set()
        for ln, rec in rows:
            key = getattr(rec, attr)
            if key in seen:
                raise SchemaError(f"duplicate {attr} {key!r}", line=ln, path=str(path))
            seen.add(key)
    trope_ids = {t.trope_id for _, t in tropes}
    work_ids = {w.work_id for _, w in works}
    example_ids = {e.example_id for _, e in examples}
    for ln, ex in examples:
        if ex.trope_id not in trope_ids:
            raise SchemaError(f"unknown trope_id {ex.trope_id!r}", line=ln, path=str(ep))
        if ex.work_id not in work_ids:
            raise SchemaError(f"unknown work_id {ex.work_id!r}", line=ln, path=str(ep))
    for ln, t in tropes:
        missing = [r for r in t.example_refs if r not in example_ids]
        if missing:
            raise SchemaError(f"unknown example_refs {missing[:3]}", line=ln, path=str(tp))
    return Corpus(tuple(t for _, t in tropes), tuple(e for _, e in examples), tuple(w for _, w in works))


def validate_corpus(corpus: Corpus) -> None:
    trope_ids = {t.trope_id for t in corpus.tropes}
    work_ids = {w.work_id for w in corpus.works}
    for ex in corpus.examples:
        if ex.trope_id not in trope_ids:
            raise ValueError(f"example {ex.example_id} references unknown trope {ex.trope_id}")
        if ex.work_id not in work_ids:
            raise ValueError(f"example {ex.example_id} references unknown work {ex.work_id}")
        if ex.text != collapse_ws(ex.text):
            raise ValueError(f"example {ex.example_id} text is not whitespace-normalized")


# ---------------------------------------------------------------- statistics


def corpus_stats(corpus: Corpus, links: Iterable[LinkResult] | None = None) -> dict[str, dict[str, int]]:
    """Per-media and total counts of titles, tropes and examples.

    With ``links``, a ``titles_with_metadata`` count is included as well.
    """
    titles = {m: set() for m in MEDIA_ORDER}
    tropes = {m: set() for m in MEDIA_ORDER}
    n_examples = {m: 0 for m in MEDIA_ORDER}
    for ex in corpus.examples:
        titles[ex.media_type].add(ex.work_id)
        tropes[ex.media_type].add(ex.trope_id)
        n_examples[ex.media_type] += 1
    matched = None
    if links is not None:
        matched = {l.work_id for l in links if l.match_kind is not MatchKind.NONE}

    stats = {}
    for m in MEDIA_ORDER:
        stats[m.value] = {"titles": len(titles[m]), "tropes": len(tropes[m]), "examples": n_examples[m]}
        if matched is not None:
            stats[m.value]["titles_with_metadata"] = len(titles[m] & matched)
    all_titles = set().union(*titles.values())
    stats["Total"] = {
        "titles": len(all_titles),
        "tropes": len(set().union(*tropes.values())),
        "examples": sum(n_examples.values()),
    }
    if matched is not None:
        stats["Total"]["titles_with_metadata"] = len(all_titles & matched)
    return stats

"""Trope page fetching, parsing and the JSONL corpus dataset."""

from __future__ import annotations

from pathlib import Path
from typing import Iterable

from .fetch import Fetcher, Politeness, RawPage, fetch_page, page_from_file
from .parse import ParserConfig, parse_trope_page, parse_trope_pages, trope_slug
from .records import (
    Corpus,
    Example,
    MediaType,
    Trope,
    Work,
    build_corpus,
    corpus_stats,
    read_dataset,
    write_dataset,
)


def load_page_dir(directory: str | Path) -> list[RawPage]:
    """Read every ``*.html`` file under ``directory`` in sorted path order."""
    paths = sorted(Path(directory).rglob("*.html"))
    return [page_from_file(p) for p in paths]


def read_url_list(path: str | Path) -> list[str]:
    urls = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            urls.append(line)
    return urls


def fetch_pages(urls: Iterable[str], fetcher: Fetcher, cache_dir: str | Path | None = None) -> list[RawPage]:
    """Fetch ``urls`` in order, reusing pages already present in ``cache_dir``."""
    import hashlib

    pages = []
    cache = Path(cache_dir) if cache_dir else None
    for url in urls:
        cached = cache / (hashlib.sha1(url.encode()).hexdigest() + ".html") if cache else None
        if cached is not None and cached.exists():
            pages.append(page_from_file(cached, url=url))
            continue
        page = fetcher.fetch(url)
        if cached is not None:
            cached.parent.mkdir(parents=True, exist_ok=True)
            cached.write_text(page.body, encoding="utf-8")
        pages.append(page)
    return pages


def ingest(pages: Iterable[RawPage], config: ParserConfig | None = None) -> Corpus:
    return build_corpus(parse_trope_pages(pages, config))


__all__ = [
    "Corpus", "Example", "Fetcher", "MediaType", "ParserConfig", "Politeness", "RawPage", "Trope", "Work",
    "build_corpus", "corpus_stats", "fetch_page", "fetch_pages", "ingest", "load_page_dir", "page_from_file",
    "parse_trope_page", "parse_trope_pages", "read_dataset", "read_url_list", "trope_slug", "write_dataset",
]

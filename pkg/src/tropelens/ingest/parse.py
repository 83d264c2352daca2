"""Trope article parsing.

Expected markup (all selectors are configurable through :class:`ParserConfig`)::

    <h1 class="entry-title">Evil Genius</h1>
    <div id="main-article">
      <p>First description paragraph.</p>
      <p>Second description paragraph.</p>
      <div class="folderlabel">Film</div>
      <div class="folder"><ul>
        <li><em>The Silence of the Lambs (1991)</em>: Hannibal Lecter ...</li>
      </ul></div>
      <h2>Literature</h2>
      <ul><li><a class="twikilink"><em>Harry Potter</em></a>: Voldemort ...</li></ul>
    </div>

Description = the paragraphs that precede the first section heading. Every
top-level list item after a heading is an example belonging to that
heading's medium; headings that do not map to Film, TV or Literature drop
their items. The work title is the first ``work_selector`` match inside the
item, else the text before the first colon. A trailing ``(YYYY)`` on the
work title is read as the release year.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, fields
from typing import Iterable, Mapping, Sequence
from urllib.parse import unquote, urlsplit

from bs4 import BeautifulSoup, Tag

from ..errors import ParseError
from .fetch import RawPage
from .records import MediaType, Trope, collapse_ws

ParsedItem = tuple[MediaType, str, str]

DEFAULT_MEDIA_ALIASES = (
    ("film", MediaType.FILM),
    ("films", MediaType.FILM),
    ("movies", MediaType.FILM),
    ("live-action tv", MediaType.TV),
    ("live action tv", MediaType.TV),
    ("television", MediaType.TV),
    ("tv", MediaType.TV),
    ("literature", MediaType.LITERATURE),
    ("novels", MediaType.LITERATURE),
    ("books", MediaType.LITERATURE),
)


@dataclass(frozen=True)
class ParserConfig:
    title_selector: str = "h1.entry-title"
    article_selector: str = "#main-article"
    description_selector: str = "p"
    section_selector: str = ".folderlabel, h2, h3"
    item_selector: str = "li"
    work_selector: str = "em, a.twikilink"
    media_aliases: tuple[tuple[str, MediaType], ...] = DEFAULT_MEDIA_ALIASES
    max_colon_title: int = 120

    @classmethod
    def from_mapping(cls, options: Mapping) -> "ParserConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(options) - known
        if unknown:
            raise ValueError(f"unknown parser options: {sorted(unknown)}")
        opts = dict(options)
        if "media_aliases" in opts:
            aliases = opts["media_aliases"]
            items = aliases.items() if isinstance(aliases, Mapping) else aliases
            opts["media_aliases"] = tuple((str(k).lower(), MediaType(v)) for k, v in items)
        return cls(**opts)

    def media_for(self, heading: str) -> MediaType | None:
        label = collapse_ws(heading).lower()
        # "Film — Live-Action", "Live-Action TV", "Literature/Novels"
        head = label.replace("—", " ").replace("–", " ").replace("/", " ").strip()
        for alias, media in self.media_aliases:
            if head == alias or head.startswith(alias + " "):
                return media
        return None


def trope_slug(url: str) -> str:
    """Lower-cased last path segment of ``url`` (``.html`` suffix dropped)."""
    path = urlsplit(url).path
    segments = [s for s in unquote(path).split("/") if s]
    if not segments:
        raise ParseError(f"cannot derive a trope id from URL {url!r}")
    slug = segments[-1]
    for suffix in (".html", ".htm"):
        if slug.lower().endswith(suffix):
            slug = slug[: -len(suffix)]
    slug = slug.strip().lower()
    if not slug:
        raise ParseError(f"cannot derive a trope id from URL {url!r}")
    return slug


def _text(el: Tag) -> str:
    return collapse_ws(el.get_text(" "))


def _parse_page(page: RawPage, config: ParserConfig) -> tuple[str, str, str, list[ParsedItem]]:
    soup = BeautifulSoup(page.body, "html.parser")
    title_el = soup.select_one(config.title_selector)
    article = soup.select_one(config.article_selector)
    if article is None:
        raise ParseError(f"{page.url}: no article block matching {config.article_selector!r}")
    title = _text(title_el) if title_el is not None else ""
    if not title:
        raise ParseError(f"{page.url}: no trope title matching {config.title_selector!r}")

    order = {id(el): i for i, el in enumerate(article.descendants) if isinstance(el, Tag)}
    headings = article.select(config.section_selector)
    first_heading = order[id(headings[0])] if headings else len(order)

    item_ids = {id(el) for el in article.select(config.item_selector)}

    def inside_item(el: Tag) -> bool:
        for parent in el.parents:
            if parent is article:
                return False
            if id(parent) in item_ids:
                return True
        return False

    paragraphs = [
        _text(p)
        for p in article.select(config.description_selector)
        if order[id(p)] < first_heading and not inside_item(p)
    ]
    description = "\n\n".join(p for p in paragraphs if p)

    items: list[ParsedItem] = []
    heading_pos = [(order[id(h)], config.media_for(_text(h))) for h in headings]
    for item in article.select(config.item_selector):
        pos = order[id(item)]
        if pos < first_heading or inside_item(item):
            continue
        media = None
        for hpos, hmedia in heading_pos:
            if hpos < pos:
                media = hmedia
            else:
                break
        if media is None:
            continue
        text = _text(item)
        if not text:
            continue
        work_el = item.select_one(config.work_selector)
        work_title = _text(work_el) if work_el is not None else ""
        if not work_title and ":" in text:
            head = text.split(":", 1)[0].strip()
            if len(head) <= config.max_colon_title:
                work_title = head
        if not work_title:
            continue
        items.append((media, work_title, text))
    return trope_slug(page.url), title, description, items


def parse_trope_page(page: RawPage, config: ParserConfig | None = None) -> tuple[Trope, list[ParsedItem]]:
    """Parse one trope article into a :class:`Trope` plus ``(media, work_title, text)`` tuples.

    Raises :class:`ParseError` when the page has no title, no article block,
    or no description paragraphs.
    """
    trope, items = parse_trope_pages([page], config)[0]
    return trope, items


def parse_trope_pages(pages: Iterable[RawPage], config: ParserConfig | None = None) -> list[tuple[Trope, list[ParsedItem]]]:
    """Parse pages, merging pages that share a trope id into one document.

    The first page of a group supplies the title and description; examples
    from all of the group's pages are concatenated in input order.
    """
    config = config or ParserConfig()
    groups: OrderedDict[str, list] = OrderedDict()
    for page in pages:
        if not isinstance(page.body, str):
            raise ParseError(f"{page.url}: page body is not text")
        slug, title, description, items = _parse_page(page, config)
        groups.setdefault(slug, []).append((page.url, title, description, items))

    out = []
    for slug, parts in groups.items():
        url, title, _, _ = parts[0]
        description = next((d for _, _, d, _ in parts if d), "")
        if not description:
            raise ParseError(f"{url}: no recognizable description block")
        items = [it for *_, its in parts for it in its]
        out.append((Trope(slug, title, description), items))
    return out


def page_canonical_url(body: str) -> str | None:
    soup = BeautifulSoup(body, "html.parser")
    link = soup.find("link", rel="canonical")
    if link is not None and link.get("href"):
        return str(link["href"])
    return None

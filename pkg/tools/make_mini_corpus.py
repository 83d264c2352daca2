#!/usr/bin/env python3
"""Regenerate the bundled mini-corpus under src/tropelens/data/mini/.

Synthetic but shaped like the real inputs: trope article HTML pages
(including media sections that ingest must drop), a film/TV catalog with
ratings and genres, a book catalog, the author-gender sidecar, and gold
example labels. Output is fully determined by SEED.

    python tools/make_mini_corpus.py
"""

import html
import json
import random
from pathlib import Path

SEED = 20201
OUT = Path(__file__).resolve().parents[1] / "src" / "tropelens" / "data" / "mini"

# (title, leaning in [-1, 1], topic words)
TROPES = [
    ("Evil Genius", -0.8, "scheme lab invention weapon plan machine"),
    ("Robot War", -0.9, "robot machine army war weapon planet"),
    ("Cure for Cancer", -0.6, "scientist lab experiment disease research cure"),
    ("Motivated by Fear", -0.7, "fear threat danger escape coward panic"),
    ("Grand Finale", -0.5, "battle final army victory last war"),
    ("Retired Badass", -0.7, "veteran fight old skill weapon training"),
    ("Stupid Boss", -0.8, "boss office company money business order"),
    ("Beleaguered Boss", -0.6, "boss office company deadline business stress"),
    ("Gibbering Genius", -0.7, "genius invention lab science theory machine"),
    ("Evil Corporation", -0.5, "company money business profit greed city"),
    ("Just Following Orders", -0.6, "soldier order army command war duty"),
    ("Sword and Sandal", -0.7, "sword arena battle empire army gladiator"),
    ("God Is Evil", -0.4, "god church religion heaven angel worship"),
    ("Ms Fanservice", 0.9, "dress outfit beautiful appearance costume shower"),
    ("Socialite", 0.8, "party dress money gown ball gossip"),
    ("Damsel in Distress", 0.8, "rescue tower capture save dragon castle"),
    ("Hot Scientist", 0.6, "scientist lab beautiful glasses research experiment"),
    ("Ditzy Secretary", 0.7, "office secretary boss phone typing desk"),
    ("Cool Old Lady", 0.8, "old tea garden wisdom cookie knitting"),
    ("Plucky Girl", 0.9, "brave adventure spirit cheerful courage determination"),
    ("Feminist Fantasy", 0.7, "kingdom magic quest sword spell dragon"),
    ("Shower Scene", 0.6, "shower bathroom towel water steam naked"),
    ("Wedding Smashers", 0.5, "wedding marriage ceremony church ring groom"),
    ("Women Are Wiser", 0.8, "wisdom advice calm sensible patience foolish"),
    ("Cooking Stories", 0.4, "kitchen meal cook recipe food chocolate"),
    ("Edutainment Show", 0.3, "lesson school learn teach episode child"),
    ("British Brevity", -0.2, "series episode season short television broadcast"),
    ("Extremely Protective Child", 0.6, "child baby protect family mother home"),
    ("First Girl Wins", 0.7, "romance childhood friend love rival date"),
    ("Necessarily Evil", -0.3, "duty sacrifice choice dark necessary order"),
]

MALE = "he him his man boy father son brother husband king prince lord actor hero uncle".split()
FEMALE = "she her woman girl mother daughter sister wife queen princess lady actress heroine aunt".split()
FILLER = ("the story shows a moment where someone does something notable during a tense scene "
          "and later the plot turns around when everyone realizes what happened").split()

# (title, year, media, genres, rating, author)
WORKS = [
    ("The Silence of the Lambs", 1991, "Film", ["Crime", "Horror", "Thriller"], 8.6, None),
    ("Dune", 1984, "Film", ["Sci-Fi", "Adventure"], 6.3, None),
    ("Rocky", 1976, "Film", ["Sports", "Drama"], 8.1, None),
    ("Pride and Prejudice", 2005, "Film", ["Romance", "Drama"], 7.8, None),
    ("Saving Private Ryan", 1998, "Film", ["War", "Drama"], 8.6, None),
    ("Mamma Mia", 2008, "Film", ["Musical", "Romance", "Comedy"], 6.5, None),
    ("Gladiator", 2000, "Film", ["Action", "Drama"], 8.5, None),
    ("The Conjuring", 2013, "Film", ["Horror"], 7.5, None),
    ("Gone", 2012, "Film", ["Thriller"], 5.9, None),
    ("Star Trek", 1966, "TV", ["Sci-Fi", "Adventure"], 8.3, None),
    ("Gilmore Girls", 2000, "TV", ["Romance", "Comedy", "Drama"], 8.2, None),
    ("Friday Night Lights", 2006, "TV", ["Sports", "Drama"], 8.7, None),
    ("Band of Brothers", 2001, "TV", ["War", "Drama"], 9.4, None),
    ("Glee", 2009, "TV", ["Musical", "Comedy"], 6.8, None),
    ("Harry Potter and the Goblet of Fire", 2000, "Literature", [], None, "J. K. Rowling"),
    ("Little Women", 1868, "Literature", [], None, "Louisa May Alcott"),
    ("Foundation", 1951, "Literature", [], None, "Isaac Asimov"),
    ("I, Robot", 1950, "Literature", [], None, "Isaac Asimov"),
    ("Emma", 1815, "Literature", [], None, "Jane Austen"),
    ("The Hobbit", 1937, "Literature", [], None, "J. R. R. Tolkien"),
    ("Discworld: Equal Rites", 1987, "Literature", [], None, "Terry Pratchett"),
]
AUTHOR_GENDER = {
    "J. K. Rowling": "Female", "Louisa May Alcott": "Female", "Jane Austen": "Female",
    "Isaac Asimov": "Male", "J. R. R. Tolkien": "Male", "Terry Pratchett": "Male",
}

SECTION_LABEL = {"Film": "Film — Live-Action", "TV": "Live-Action TV", "Literature": "Literature"}


def camel(title):
    return "".join(w[:1].upper() + w[1:] for w in title.replace("-", " ").split())


def sentence(rng, leaning, topic, n):
    words = []
    p_gendered = 0.18
    p_female = (leaning + 1) / 2
    for _ in range(n):
        r = rng.random()
        if r < p_gendered:
            words.append(rng.choice(FEMALE if rng.random() < p_female else MALE))
        elif r < p_gendered + 0.35:
            words.append(rng.choice(topic))
        else:
            words.append(rng.choice(FILLER))
    return " ".join(words).capitalize() + "."


def main():
    rng = random.Random(SEED)
    pages = OUT / "pages"
    pages.mkdir(parents=True, exist_ok=True)
    for old in pages.glob("*.html"):
        old.unlink()

    gold = []
    work_pool = {m: [w for w in WORKS if w[2] == m] for m in ("Film", "TV", "Literature")}
    for title, leaning, topic_words in TROPES:
        topic = topic_words.split()
        slug = camel(title)
        desc = [sentence(rng, leaning, topic, rng.randint(25, 40)) + " " + sentence(rng, leaning, topic, 20)
                for _ in range(2)]
        sections = {}
        n_examples = rng.randint(5, 9)
        for _ in range(n_examples):
            media = rng.choice(["Film", "Film", "TV", "Literature", "Literature"])
            work = rng.choice(work_pool[media])
            sections.setdefault(media, []).append((work, sentence(rng, leaning, topic, rng.randint(20, 36))))
        parts = [
            "<!DOCTYPE html>",
            "<html><head><meta charset=\"utf-8\">",
            f"<title>{html.escape(title)} - Mini Tropes</title>",
            f"<link rel=\"canonical\" href=\"https://tropes.example.org/pmwiki/pmwiki.php/Main/{slug}\">",
            "</head><body>",
            f"<h1 class=\"entry-title\">{html.escape(title)}</h1>",
            "<div id=\"main-article\">",
        ]
        parts += [f"<p>{html.escape(p)}</p>" for p in desc]
        for media in ("Film", "TV", "Literature"):
            if media not in sections:
                continue
            parts.append(f"<div class=\"folderlabel\">{html.escape(SECTION_LABEL[media])}</div>")
            parts.append("<div class=\"folder\"><ul>")
            for work, text in sections[media]:
                wt = f"{work[0]} ({work[1]})" if media != "Literature" else work[0]
                parts.append(f"<li><a class=\"twikilink\" href=\"/pmwiki/pmwiki.php/{media}/{camel(work[0])}\">"
                             f"<em>{html.escape(wt)}</em></a>: {html.escape(text)}</li>")
            parts.append("</ul></div>")
        parts.append("<div class=\"folderlabel\">Web Comics</div>")
        parts.append("<div class=\"folder\"><ul><li><em>Some Webcomic</em>: "
                     + html.escape(sentence(rng, leaning, topic, 15)) + "</li></ul></div>")
        parts.append("</div></body></html>")
        (pages / f"{slug}.html").write_text("\n".join(parts) + "\n", encoding="utf-8")

        # gold labels for the first example of every trope: intended leaning, NA when weak
        label = "NA" if abs(leaning) < 0.35 else ("Female" if leaning > 0 else "Male")
        gold.append((slug.lower() + "/00000", label))

    film = []
    for i, (title, year, media, genres, rating, _) in enumerate(WORKS):
        if media == "Literature" or title == "Gone":
            continue
        film.append({"catalog_id": f"tt{1000 + i:07d}", "title": title, "year": year, "genres": genres,
                     "rating": rating, "author": None, "author_gender": None})
    # a remake that year-matching must not confuse, and an ambiguous duplicate
    film.append({"catalog_id": "tt0002021", "title": "Dune", "year": 2021, "genres": ["Sci-Fi"], "rating": 8.0,
                 "author": None, "author_gender": None})
    for cid in ("tt0003001", "tt0003002"):
        film.append({"catalog_id": cid, "title": "Gone", "year": 2012, "genres": ["Thriller"], "rating": 5.9,
                     "author": None, "author_gender": None})
    books = []
    for i, (title, year, media, _, _, author) in enumerate(WORKS):
        if media != "Literature":
            continue
        books.append({"catalog_id": f"gr{500 + i}", "title": title, "year": None, "genres": [], "rating": None,
                      "author": author, "author_gender": None})

    def dump(name, rows):
        with open(OUT / name, "w", encoding="utf-8", newline="\n") as fh:
            for r in rows:
                fh.write(json.dumps(r, ensure_ascii=False) + "\n")

    dump("film_catalog.jsonl", sorted(film, key=lambda r: r["catalog_id"]))
    dump("book_catalog.jsonl", books)
    with open(OUT / "author_gender.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("author\tgender\n")
        for a in sorted(AUTHOR_GENDER):
            fh.write(f"{a}\t{AUTHOR_GENDER[a]}\n")
    with open(OUT / "gold_labels.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("example_id\tlabel\n")
        for eid, label in sorted(gold):
            fh.write(f"{eid}\t{label}\n")


if __name__ == "__main__":
    main()

from datetime import datetime, timezone
from pathlib import Path

import pytest
from hypothesis import settings

from tropelens.ingest import Corpus, Example, MediaType, Trope, Work
from tropelens.lexicon import data_path

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

MINI_DIR = data_path("mini")
MINI_CONFIG = MINI_DIR / "config.toml"
FIXTURES = Path(__file__).parent / "fixtures"

EPOCH = datetime(2020, 1, 1, tzinfo=timezone.utc)


def make_corpus():
    """Hand-built corpus: 5 works (3 film, 1 TV, 1 book), 4 tropes, 12 examples.

    Per medium: Film 6 examples over tropes {a, b, c, d}, TV 2 over {a, d},
    Literature 4 over {b, c, d}.
    """
    works = [
        Work("w1", "Alien", MediaType.FILM, 1979),
        Work("w2", "Heat", MediaType.FILM, 1995),
        Work("w3", "Jaws", MediaType.FILM, 1975),
        Work("w4", "Lost", MediaType.TV, 2004),
        Work("w5", "Emma", MediaType.LITERATURE, None),
    ]
    placement = [
        ("a", "w1"), ("a", "w2"), ("a", "w4"),
        ("b", "w1"), ("b", "w3"), ("b", "w5"),
        ("c", "w2"), ("c", "w5"), ("c", "w5"),
        ("d", "w4"), ("d", "w5"), ("d", "w3"),
    ]
    media = {w.work_id: w.media_type for w in works}
    examples, refs = [], {}
    for trope_id, work_id in placement:
        idx = len(refs.setdefault(trope_id, []))
        eid = f"{trope_id}/{idx:05d}"
        refs[trope_id].append(eid)
        examples.append(Example(eid, trope_id, work_id, media[work_id], f"she met him in {work_id} number {idx}"))
    tropes = [Trope(t, t.upper() + " Trope", f"description of {t}", tuple(refs[t])) for t in "abcd"]
    return Corpus(tuple(tropes), tuple(examples), tuple(works))


@pytest.fixture
def mini_corpus():
    return make_corpus()

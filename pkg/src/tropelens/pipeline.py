"""Pipeline stages, their on-disk artifacts, and report emission.

Every stage reads its inputs from the output directory (or configured
input paths), writes its artifacts atomically, and stamps CSV/JSON reports
with the toolkit version and the config digest.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from collections import defaultdict
from contextlib import contextmanager
from pathlib import Path
from typing import Callable, Iterable, Sequence

from . import __version__
from .classify import (
    RatingBin,
    TropeFeatureMatrix,
    author_gender_task,
    bin_rating,
    build_matrix,
    top_features,
    train_logreg,
)
from .config import PipelineConfig
from .errors import ConfigError, DataError, MissingDependency, RangeError, TropeLensError
from .ingest import Fetcher, Politeness, fetch_pages, ingest, load_page_dir, read_url_list
from .ingest.parse import ParserConfig
from .ingest.records import Corpus, MediaType, corpus_stats, read_dataset, write_dataset
from .jsonl import atomic_open, iter_jsonl, write_jsonl
from .lexicon import GenderLexicon, Lemmatizer, load_lexicon
from .linking import (
    CatalogRecord,
    LinkResult,
    MatchKind,
    attach_author_genders,
    coverage_report,
    link_works,
    load_author_genders,
    load_catalog,
)
from .scoring import (
    GenderednessReport,
    GenreScore,
    build_documents,
    classify_example,
    evaluate_lexicon,
    genre_genderedness,
    implicit_gendered_tropes,
    score_corpus,
    work_tropes,
)
from .topics import load_stopwords, select_training_set, skew_summary, topic_gender_profiles, train_lda

log = logging.getLogger(__name__)

DATASET_DIR = "dataset"
CORPUS_STATS = "corpus_stats.json"
LINKS = "links.jsonl"
COVERAGE = "coverage.json"
GENDEREDNESS = "genderedness.csv"
CORPUS_GENDER = "corpus_gender.json"
LEXICON_EVAL = "lexicon_eval.json"
EXAMPLE_PREDICTIONS = "example_predictions.csv"
GENRE_SCORES = "genre_scores.csv"
GENRE_PLOTDATA = "genre_plotdata.csv"
TOPICS = "topics.json"
IMPLICIT = "implicit_tropes.csv"
SUMMARY = "summary.json"
LOCK_FILE = ".tropelens.lock"

FILM_TV = (MediaType.FILM, MediaType.TV)


# ---------------------------------------------------------------- writers


def _header(cfg: PipelineConfig) -> str:
    return f"# tropelens {__version__} config_sha256={cfg.digest()}\n"


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)


def write_csv(path: Path, cfg: PipelineConfig, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    with atomic_open(path) as fh:
        fh.write(_header(cfg))
        fh.write(buf.getvalue())


def read_csv(path: Path) -> list[dict[str, str]]:
    if not path.exists():
        raise MissingDependency(path.name)
    with open(path, encoding="utf-8", newline="") as fh:
        lines = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(lines))


def write_json(path: Path, cfg: PipelineConfig, payload: dict) -> None:
    doc = {"meta": {"toolkit": "tropelens", "version": __version__, "config_sha256": cfg.digest()}}
    doc.update(payload)
    with atomic_open(path) as fh:
        fh.write(json.dumps(doc, indent=2, ensure_ascii=False, allow_nan=False, sort_keys=False))
        fh.write("\n")


def read_json(path: Path) -> dict:
    if not path.exists():
        raise MissingDependency(path.name)
    return json.loads(path.read_text(encoding="utf-8"))


@contextmanager
def output_lock(out: Path):
    """Exclusive per-output-directory lock; a lock left by a dead process is reclaimed."""
    out.mkdir(parents=True, exist_ok=True)
    lock = out / LOCK_FILE
    for _ in range(2):
        try:
            fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            break
        except FileExistsError:
            try:
                pid = int(lock.read_text().strip() or 0)
            except (OSError, ValueError):
                pid = 0
            if pid and _pid_alive(pid):
                raise ConfigError(f"output directory {out} is locked by running process {pid}") from None
            lock.unlink(missing_ok=True)
    else:
        raise ConfigError(f"could not acquire lock {lock}")
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        lock.unlink(missing_ok=True)


def _pid_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True


# ---------------------------------------------------------------- loaders


class Context:
    """Lazily loaded shared inputs for one stage run."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.out = Path(cfg.out)
        self._lexicon = self._lemmatizer = self._corpus = None
        self._catalogs = None

    @property
    def dataset_dir(self) -> Path:
        return Path(self.cfg.corpus) if self.cfg.corpus else self.out / DATASET_DIR

    @property
    def lexicon(self) -> GenderLexicon:
        if self._lexicon is None:
            self._lexicon = load_lexicon(self.cfg.lexicon)
        return self._lexicon

    @property
    def lemmatizer(self) -> Lemmatizer:
        if self._lemmatizer is None:
            self._lemmatizer = Lemmatizer.load(self.cfg.lemmas)
        return self._lemmatizer

    @property
    def corpus(self) -> Corpus:
        if self._corpus is None:
            if not (self.dataset_dir / "tropes.jsonl").exists():
                raise MissingDependency(f"{DATASET_DIR}/tropes.jsonl")
            self._corpus = read_dataset(self.dataset_dir)
        return self._corpus

    def catalogs(self) -> tuple[dict[str, CatalogRecord], dict[str, CatalogRecord]]:
        if self._catalogs is None:
            film = load_catalog(self.cfg.film_catalog) if self.cfg.film_catalog else []
            books = load_catalog(self.cfg.book_catalog) if self.cfg.book_catalog else []
            if self.cfg.author_gender:
                books = attach_author_genders(books, load_author_genders(self.cfg.author_gender))
            self._catalogs = ({r.catalog_id: r for r in film}, {r.catalog_id: r for r in books})
        return self._catalogs

    def links(self) -> list[LinkResult]:
        path = self.out / LINKS
        if not path.exists():
            raise MissingDependency(LINKS)
        return [LinkResult.from_json(obj) for _, obj in iter_jsonl(path)]

    def linked_records(self) -> dict[str, CatalogRecord]:
        """work_id -> matched catalog record, using the catalog of the work's medium."""
        film, books = self.catalogs()
        works = self.corpus.work_map
        out = {}
        for link in self.links():
            if link.match_kind is MatchKind.NONE or link.work_id not in works:
                continue
            table = books if works[link.work_id].media_type is MediaType.LITERATURE else film
            if link.catalog_id not in table:
                raise DataError(f"link to unknown catalog id {link.catalog_id}; re-run 'link'")
            out[link.work_id] = table[link.catalog_id]
        return out

    def reports(self) -> list[GenderednessReport]:
        rows = read_csv(self.out / GENDEREDNESS)
        out = []
        for row in rows:
            f = lambda k: float(row[k]) if row[k] != "" else None
            out.append(GenderednessReport(row["trope_id"], int(row["m"]), int(row["f"]), f("r"), f("d"), f("g")))
        return out


# ---------------------------------------------------------------- stages


def stage_ingest(ctx: Context) -> None:
    cfg = ctx.cfg
    parser = ParserConfig.from_mapping(cfg.parser) if cfg.parser else ParserConfig()
    if cfg.pages:
        pages = load_page_dir(cfg.pages)
    elif cfg.urls:
        fetcher = Fetcher(Politeness(cfg.min_delay_ms, cfg.max_retries, cfg.user_agent), cfg.robots)
        pages = fetch_pages(read_url_list(cfg.urls), fetcher, cfg.cache_dir)
    else:
        raise ConfigError("ingest needs either 'pages' (HTML directory) or 'urls' (URL list)")
    corpus = ingest(pages, parser)
    write_dataset(corpus, ctx.out / DATASET_DIR)
    write_json(ctx.out / CORPUS_STATS, cfg, {"stats": corpus_stats(corpus)})
    log.info("ingested %d tropes, %d examples, %d works", len(corpus.tropes), len(corpus.examples), len(corpus.works))


def stage_link(ctx: Context) -> None:
    cfg = ctx.cfg
    corpus = ctx.corpus
    film, books = ctx.catalogs()
    screen = [w for w in corpus.works if w.media_type in FILM_TV]
    lit = [w for w in corpus.works if w.media_type is MediaType.LITERATURE]
    links = link_works(screen, film.values(), cfg.require_year) + link_works(lit, books.values(), cfg.book_require_year)
    links.sort(key=lambda l: l.work_id)
    write_jsonl(ctx.out / LINKS, (l.to_json() for l in links))
    kinds = defaultdict(int)
    for l in links:
        kinds[l.match_kind.value] += 1
    write_json(ctx.out / COVERAGE, cfg, {
        "matched_by_media": coverage_report(links, corpus.works),
        "match_kinds": dict(sorted(kinds.items())),
        "stats": corpus_stats(corpus, links),
    })


def stage_score(ctx: Context) -> None:
    cfg = ctx.cfg
    docs = build_documents(ctx.corpus, ctx.lemmatizer)
    stats, reports = score_corpus(docs, ctx.lexicon, ctx.lemmatizer, cfg.count_mode)
    n_tokens = {d.trope_id: d.n_tokens for d in docs}
    write_csv(ctx.out / GENDEREDNESS, cfg, ["trope_id", "m", "f", "r", "d", "g", "scored", "n_tokens"],
              ([r.trope_id, r.m, r.f, r.r, r.d, r.g, r.scored, n_tokens[r.trope_id]] for r in reports))
    scored = [r.g for r in reports if r.scored]
    write_json(ctx.out / CORPUS_GENDER, cfg, {
        "m_total": stats.m_total,
        "f_total": stats.f_total,
        "r_corpus": stats.r_corpus,
        "n_tropes": len(reports),
        "n_scored": len(scored),
        "g_min": min(scored),
        "g_max": max(scored),
        "n_highly_gendered": sum(1 for g in scored if abs(g) > cfg.threshold),
        "lexicon_pairs": len(ctx.lexicon),
        "count_mode": cfg.count_mode,
    })


def load_gold_labels(path: Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader((l for l in fh if not l.startswith("#")), delimiter="\t")
        if reader.fieldnames is None or {"example_id", "label"} - set(reader.fieldnames):
            raise DataError(f"{path}: expected header 'example_id<TAB>label'")
        for row in reader:
            rows.append({"example_id": row["example_id"].strip(), "label": row["label"].strip()})
    return rows


def stage_validate_lexicon(ctx: Context) -> None:
    cfg = ctx.cfg
    if not cfg.gold_labels:
        raise ConfigError("validate-lexicon needs 'gold_labels' (TSV with example_id, label)")
    gold = load_gold_labels(cfg.gold_labels)
    examples = {e.example_id: e for e in ctx.corpus.examples}
    unknown = [g["example_id"] for g in gold if g["example_id"] not in examples]
    if unknown:
        raise DataError(f"gold labels reference unknown examples: {unknown[:5]}")
    preds = [classify_example(examples[g["example_id"]], ctx.lexicon, ctx.lemmatizer, cfg.count_mode) for g in gold]
    metrics = evaluate_lexicon(preds, gold)
    gold_map = {g["example_id"]: g["label"] for g in gold}
    write_csv(ctx.out / EXAMPLE_PREDICTIONS, cfg, ["example_id", "gold", "predicted"],
              sorted((p.example_id, gold_map[p.example_id], p.predicted.value) for p in preds))
    counts = defaultdict(int)
    for g in gold:
        counts[g["label"]] += 1
    write_json(ctx.out / LEXICON_EVAL, cfg, {"n_gold": len(gold), "gold_counts": dict(sorted(counts.items())),
                                              "per_class": metrics})


def emit_genre_plotdata(scores: dict[str, GenreScore], path: Path, cfg: PipelineConfig) -> None:
    """Bar-chart data: one row per genre, ascending by mean g (ties by genre name)."""
    rows = sorted(scores.values(), key=lambda s: (s.mean_g, s.genre))
    write_csv(path, cfg, ["genre", "mean_g", "n_tropes"], ((s.genre, s.mean_g, s.n_tropes) for s in rows))


def stage_genres(ctx: Context) -> None:
    reports = ctx.reports()
    records = ctx.linked_records()
    works = ctx.corpus.work_map
    genres = {w: rec.genres for w, rec in records.items() if works[w].media_type in FILM_TV}
    scores = genre_genderedness(genres, work_tropes(ctx.corpus), reports)
    write_csv(ctx.out / GENRE_SCORES, ctx.cfg, ["genre", "mean_g", "n_tropes"],
              ((s.genre, s.mean_g, s.n_tropes) for s in scores.values()))
    emit_genre_plotdata(scores, ctx.out / GENRE_PLOTDATA, ctx.cfg)


def stage_topics(ctx: Context) -> None:
    cfg = ctx.cfg
    reports = ctx.reports()
    docs = build_documents(ctx.corpus, ctx.lemmatizer)
    training = select_training_set(docs, reports, cfg.min_tokens, cfg.subset)
    stopwords = load_stopwords(cfg.stopwords)
    model = train_lda(training, K=cfg.k, alpha=cfg.alpha, beta=cfg.beta, iterations=cfg.iterations, seed=cfg.seed,
                      stopwords=stopwords, min_df=cfg.min_df, lemmatizer=ctx.lemmatizer)
    profiles = topic_gender_profiles(model, reports)
    write_json(ctx.out / TOPICS, cfg, {
        "K": model.K,
        "alpha": model.alpha,
        "beta": model.beta,
        "iterations": model.iterations,
        "seed": model.seed,
        "n_documents": len(training),
        "vocab_size": len(model.vocab),
        "skew": skew_summary(profiles),
        "topics": [
            {
                "topic_id": p.topic_id,
                "n_female": p.n_female,
                "n_male": p.n_male,
                "n_assigned": p.n_assigned,
                "ratio": None if p.ratio is None or math.isinf(p.ratio) else p.ratio,
                "skew": p.skew,
                "top_terms": list(p.top_terms),
            }
            for p in profiles
        ],
    })


def stage_implicit(ctx: Context) -> None:
    reports = ctx.reports()
    tropes = ctx.corpus.trope_map
    ids = implicit_gendered_tropes(reports, tropes.values(), ctx.lexicon, ctx.cfg.threshold, ctx.lemmatizer)
    g = {r.trope_id: r.g for r in reports}
    write_csv(ctx.out / IMPLICIT, ctx.cfg, ["trope_id", "title", "g", "leaning"],
              ((t, tropes[t].title, g[t], "female" if g[t] > 0 else "male") for t in ids))


def _write_classifier_outputs(ctx: Context, task_dir: Path, matrix: TropeFeatureMatrix, result, reports,
                              extra: dict) -> None:
    cfg = ctx.cfg
    matrix.save(task_dir)
    titles = {t.trope_id: t.title for t in ctx.corpus.tropes}
    test = set(result.test_ids)
    pred = dict(zip(result.test_ids, result.test_predictions))
    gold = dict(zip(result.test_ids, result.test_labels))
    write_csv(task_dir / "predictions.csv", cfg, ["row_id", "gold", "predicted"],
              ((r, gold[r], pred[r]) for r in sorted(test)))
    feature_rows, per_class = [], {}
    for label in result.model.classes:
        rep = top_features(result.model, label, cfg.top_k, reports)
        per_class[label] = {"mean_abs_g": rep.mean_abs_g, "mean_g": rep.mean_g, "k": len(rep.top_tropes)}
        for rank, (trope_id, weight, g) in enumerate(rep.top_tropes, start=1):
            feature_rows.append((label, rank, trope_id, titles.get(trope_id, ""), weight, g))
    write_csv(task_dir / "feature_report.csv", cfg, ["class", "rank", "trope_id", "title", "weight", "g"], feature_rows)
    payload = {
        "n_rows": matrix.shape[0],
        "n_features": matrix.shape[1],
        "n_train": len(result.train_ids),
        "n_test": len(result.test_ids),
        "classes": result.model.classes,
        "test_accuracy": result.test_accuracy,
        "majority_baseline": result.majority_baseline,
        "converged": result.model.converged,
        "n_iter": result.model.n_iter,
        "top_features": per_class,
    }
    payload.update(extra)
    write_json(task_dir / "metrics.json", cfg, payload)


def stage_classify_rating(ctx: Context) -> None:
    cfg = ctx.cfg
    reports = ctx.reports()
    records = ctx.linked_records()
    corpus = ctx.corpus
    works = corpus.work_map
    labels = {}
    for work_id, rec in records.items():
        if works[work_id].media_type not in FILM_TV or rec.rating is None:
            continue
        try:
            labels[work_id] = bin_rating(rec.rating)
        except RangeError:
            log.warning("skipping %s: rating %s outside (0, 10]", work_id, rec.rating)
    trope_counts = defaultdict(int)
    entity_examples = defaultdict(list)
    for ex in corpus.examples:
        trope_counts[ex.trope_id] += 1
        if ex.work_id in labels:
            entity_examples[ex.work_id].append(ex.trope_id)
    matrix = build_matrix(entity_examples, cfg.min_examples, trope_counts)
    result = train_logreg(matrix, {r: labels[r].value for r in matrix.row_ids}, C=cfg.C,
                          train_frac=cfg.train_frac, seed=cfg.seed)
    bins = defaultdict(int)
    for r in matrix.row_ids:
        bins[labels[r].value] += 1
    _write_classifier_outputs(ctx, ctx.out / "classify_rating", matrix, result, reports,
                              {"label_counts": {b.value: bins.get(b.value, 0) for b in RatingBin}})


def stage_classify_author(ctx: Context) -> None:
    cfg = ctx.cfg
    reports = ctx.reports()
    records = ctx.linked_records()
    corpus = ctx.corpus
    works = corpus.work_map
    author_of, labels = {}, {}
    for work_id, rec in records.items():
        if works[work_id].media_type is MediaType.LITERATURE and rec.author and rec.author_gender:
            author_of[work_id] = rec.author
            labels[rec.author] = rec.author_gender.value
    trope_counts = defaultdict(int)
    author_examples = defaultdict(list)
    for ex in corpus.examples:
        trope_counts[ex.trope_id] += 1
        if ex.work_id in author_of:
            author_examples[author_of[ex.work_id]].append(ex.trope_id)
    matrix = build_matrix(author_examples, cfg.min_examples, trope_counts)
    row_labels = {a: labels[a] for a in matrix.row_ids}
    result = author_gender_task(matrix, row_labels, {a: author_examples[a] for a in matrix.row_ids}, reports,
                                C=cfg.C, train_frac=cfg.train_frac, seed=cfg.seed, threshold=cfg.threshold)
    _write_classifier_outputs(ctx, ctx.out / "classify_author_gender", matrix, result, reports,
                              {"gendered_usage": result.usage})


def stage_report(ctx: Context) -> None:
    """Collect the produced analyses into summary tables."""
    cfg = ctx.cfg
    reports = ctx.reports()
    titles = {t.trope_id: t.title for t in ctx.corpus.tropes}
    scored = sorted((r for r in reports if r.scored), key=lambda r: (r.g, r.trope_id))
    n = 5
    male, female = scored[:n], scored[::-1][:n]
    rows = []
    for i in range(max(len(male), len(female))):
        m = male[i] if i < len(male) else None
        f = female[i] if i < len(female) else None
        rows.append((titles.get(m.trope_id, m.trope_id) if m else "", m.g if m else None,
                     titles.get(f.trope_id, f.trope_id) if f else "", f.g if f else None))
    tables = ctx.out / "tables"
    write_csv(tables / "gendered_tropes.csv", cfg, ["male_trope", "male_g", "female_trope", "female_g"], rows)

    summary = {"corpus_gender": {k: v for k, v in read_json(ctx.out / CORPUS_GENDER).items() if k != "meta"}}
    optional = {
        "corpus_stats": ctx.out / COVERAGE,
        "lexicon_eval": ctx.out / LEXICON_EVAL,
        "topics": ctx.out / TOPICS,
        "rating_task": ctx.out / "classify_rating" / "metrics.json",
        "author_task": ctx.out / "classify_author_gender" / "metrics.json",
    }
    for key, path in optional.items():
        if path.exists():
            doc = read_json(path)
            doc.pop("meta", None)
            if key == "topics":
                doc = {k: doc[k] for k in ("K", "n_documents", "skew")}
            if key == "corpus_stats":
                doc = doc["stats"]
            summary[key] = doc
    for task, name in (("classify_rating", "rating_features.csv"), ("classify_author_gender", "author_features.csv")):
        path = ctx.out / task / "feature_report.csv"
        if not path.exists():
            continue
        rows = [r for r in read_csv(path) if r["g"] != "" and abs(float(r["g"])) > cfg.threshold]
        write_csv(tables / name, cfg, ["class", "rank", "trope", "g"],
                  ((r["class"], int(r["rank"]), r["title"] or r["trope_id"], float(r["g"])) for r in rows))
    genre_path = ctx.out / GENRE_PLOTDATA
    if genre_path.exists():
        summary["genres"] = [{"genre": r["genre"], "mean_g": float(r["mean_g"])} for r in read_csv(genre_path)]
    write_json(ctx.out / SUMMARY, cfg, summary)


STAGES: dict[str, Callable[[Context], None]] = {
    "ingest": stage_ingest,
    "link": stage_link,
    "score": stage_score,
    "validate-lexicon": stage_validate_lexicon,
    "genres": stage_genres,
    "topics": stage_topics,
    "implicit": stage_implicit,
    "classify-rating": stage_classify_rating,
    "classify-author-gender": stage_classify_author,
    "report": stage_report,
}

PIPELINE_ORDER = tuple(STAGES)


def run_stage(name: str, cfg: PipelineConfig) -> None:
    if name not in STAGES:
        raise ConfigError(f"unknown stage {name!r}")
    out = Path(cfg.out)
    with output_lock(out):
        log.info("running stage %s", name)
        STAGES[name](Context(cfg))


def _configured(name: str, cfg: PipelineConfig) -> bool:
    if name == "validate-lexicon":
        return cfg.gold_labels is not None
    if name in ("genres", "classify-rating"):
        return cfg.film_catalog is not None
    if name == "classify-author-gender":
        return cfg.book_catalog is not None and cfg.author_gender is not None
    return True


def run_pipeline(cfg: PipelineConfig, stages: Sequence[str] = PIPELINE_ORDER) -> list[str]:
    """Run ``stages`` in order, skipping those whose optional inputs are not configured."""
    ran = []
    for name in stages:
        if not _configured(name, cfg):
            log.info("skipping %s: inputs not configured", name)
            continue
        run_stage(name, cfg)
        ran.append(name)
    return ran

"""Command-line entry point.

    tropelens --config run.toml --out out/ ingest
    tropelens score --lexicon lexicon.tsv --corpus out/dataset --out out/
    tropelens topics --k 75 --min-tokens 1000 --subset 3000 --seed 1
    tropelens classify --task rating --C 1.0 --train-frac 0.8 --min-examples 10

Exit codes: 0 ok, 2 configuration error, 3 missing upstream artifact,
4 data error.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings

from . import __version__
from .config import load_config
from .errors import ConfigError, MissingDependency, TropeLensError

EXIT_OK, EXIT_CONFIG, EXIT_MISSING, EXIT_DATA = 0, 2, 3, 4


def _common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="TOML config file")
    parser.add_argument("--out", default=default, help="output directory (default: out)")
    parser.add_argument("--seed", type=int, default=default, help="random seed for LDA and train/test splits")
    parser.add_argument("-v", "--verbose", action="count", default=argparse.SUPPRESS if suppress else 0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tropelens", description="Trope corpus genderedness analysis")
    parser.add_argument("--version", action="version", version=f"tropelens {__version__}")
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help_):
        p = sub.add_parser(name, help=help_)
        _common(p, suppress=True)
        return p

    p = add("ingest", "parse trope pages (local HTML or fetched URLs) into the JSONL dataset")
    p.add_argument("--pages", help="directory of trope page HTML files")
    p.add_argument("--urls", help="file listing trope page URLs to fetch")
    p.add_argument("--cache", dest="cache_dir", help="cache directory for fetched pages")
    p.add_argument("--min-delay-ms", type=int)
    p.add_argument("--max-retries", type=int)
    p.add_argument("--user-agent")
    p.add_argument("--robots", help="local robots.txt policy applied to every host")

    p = add("link", "match works to film/TV and book catalogs by title and year")
    p.add_argument("--film-catalog")
    p.add_argument("--book-catalog")
    p.add_argument("--author-gender", help="author<TAB>gender TSV")
    p.add_argument("--no-require-year", dest="require_year", action="store_const", const=False)

    p = add("score", "compute per-trope genderedness scores")
    p.add_argument("--lexicon")
    p.add_argument("--lemmas")
    p.add_argument("--corpus", help="dataset directory (default: OUT/dataset)")
    p.add_argument("--count-mode", choices=["tokens", "types"])

    p = add("validate-lexicon", "precision/recall/F1 of lexicon labels against gold example labels")
    p.add_argument("--gold", dest="gold_labels", help="example_id<TAB>label TSV")

    add("genres", "mean genderedness per film/TV genre")

    p = add("topics", "LDA over the most male- and female-leaning tropes")
    p.add_argument("--k", type=int)
    p.add_argument("--min-tokens", type=int)
    p.add_argument("--subset", type=int)
    p.add_argument("--iterations", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)
    p.add_argument("--stopwords")

    p = add("implicit", "highly gendered tropes whose titles carry no gendered term")
    p.add_argument("--threshold", type=float)

    p = add("classify", "rating-bin or author-gender prediction from trope presence")
    p.add_argument("--task", choices=["rating", "author-gender"], required=True)
    p.add_argument("--C", dest="C", type=float)
    p.add_argument("--train-frac", type=float)
    p.add_argument("--min-examples", type=int)
    p.add_argument("--top-k", type=int)

    add("report", "summary tables from the produced artifacts")
    add("all", "run every stage in order")
    return parser


_NOT_SETTINGS = {"command", "config", "verbose", "task"}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(getattr(args, "verbose", 0), 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    logging.captureWarnings(True)
    warnings.simplefilter("default")

    from .pipeline import PIPELINE_ORDER, run_pipeline, run_stage

    overrides = {k: v for k, v in vars(args).items() if k not in _NOT_SETTINGS}
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "all":
            run_pipeline(cfg, PIPELINE_ORDER)
        elif args.command == "classify":
            run_stage("classify-rating" if args.task == "rating" else "classify-author-gender", cfg)
        else:
            run_stage(args.command, cfg)
    except ConfigError as exc:
        print(f"tropelens: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingDependency as exc:
        print(f"tropelens: {exc} (run the producing stage first)", file=sys.stderr)
        return EXIT_MISSING
    except (TropeLensError, OSError) as exc:
        print(f"tropelens: error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

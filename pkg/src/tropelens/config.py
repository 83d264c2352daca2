"""Pipeline configuration: TOML file plus command-line overrides."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError

PATH_FIELDS = (
    "pages", "urls", "cache_dir", "robots", "corpus", "lexicon", "lemmas", "stopwords",
    "film_catalog", "book_catalog", "author_gender", "gold_labels",
)


@dataclass
class PipelineConfig:
    out: Path = Path("out")
    seed: int = 0

    # inputs
    pages: Path | None = None
    urls: Path | None = None
    cache_dir: Path | None = None
    robots: Path | None = None
    corpus: Path | None = None
    lexicon: Path | None = None
    lemmas: Path | None = None
    stopwords: Path | None = None
    film_catalog: Path | None = None
    book_catalog: Path | None = None
    author_gender: Path | None = None
    gold_labels: Path | None = None
    parser: dict = field(default_factory=dict)

    # fetching
    min_delay_ms: int = 1000
    max_retries: int = 3
    user_agent: str = "tropelens/0.1 (corpus research; polite crawler)"

    # linking and scoring
    require_year: bool = True
    book_require_year: bool = False
    count_mode: str = "tokens"
    threshold: float = 1.0

    # topics
    k: int = 75
    min_tokens: int = 1000
    subset: int = 3000
    alpha: float | None = None
    beta: float = 0.01
    iterations: int = 1000
    min_df: int = 2

    # classifiers
    C: float = 1.0
    train_frac: float = 0.8
    min_examples: int = 10
    top_k: int = 50

    def validate(self) -> None:
        if self.count_mode not in ("tokens", "types"):
            raise ConfigError(f"count_mode must be 'tokens' or 'types', not {self.count_mode!r}")
        if self.k < 2:
            raise ConfigError("k must be at least 2")
        if not 0 < self.train_frac < 1:
            raise ConfigError("train_frac must lie in (0, 1)")
        if self.C <= 0:
            raise ConfigError("C must be positive")
        if self.subset < 2 or self.min_tokens < 0 or self.min_examples < 1 or self.iterations < 0:
            raise ConfigError("subset >= 2, min_tokens >= 0, min_examples >= 1 and iterations >= 0 required")
        for name in PATH_FIELDS:
            value = getattr(self, name)
            if value is not None and name != "cache_dir" and not Path(value).exists():
                raise ConfigError(f"{name} path does not exist: {value}")

    def canonical(self) -> dict[str, Any]:
        """Every setting except the output directory, JSON-serializable and key-sorted."""
        out = {}
        for f in dataclasses.fields(self):
            if f.name == "out":
                continue
            value = getattr(self, f.name)
            out[f.name] = str(value) if isinstance(value, Path) else value
        return dict(sorted(out.items()))

    def digest(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"), default=str)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


_FIELD_TYPES = {f.name: f for f in dataclasses.fields(PipelineConfig)}


def _coerce(name: str, value: Any, base: Path | None) -> Any:
    if name in PATH_FIELDS or name == "out":
        if value is None:
            return None
        path = Path(value).expanduser()
        if base is not None and not path.is_absolute():
            path = base / path
        return path
    if name == "parser":
        if not isinstance(value, Mapping):
            raise ConfigError("[parser] must be a table")
        return dict(value)
    default = getattr(PipelineConfig(), name)
    try:
        if isinstance(default, bool):
            if not isinstance(value, bool):
                raise TypeError
            return value
        if isinstance(default, int) and not isinstance(default, bool):
            if isinstance(value, bool) or float(value) != int(value):
                raise TypeError
            return int(value)
        if isinstance(default, float) or (default is None and name == "alpha"):
            return None if value is None else float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value for {name}: {value!r}") from None


def load_config(path: str | Path | None = None, overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    """Build a config from an optional TOML file; non-None ``overrides`` win.

    Section headers in the TOML file are for readability only, except
    ``[parser]`` which carries HTML selector settings. Relative paths are
    resolved against the TOML file's directory.
    """
    values: dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        base = path.resolve().parent
        for key, value in doc.items():
            if isinstance(value, Mapping) and key != "parser":
                items = value.items()
            else:
                items = [(key, value)]
            for name, v in items:
                name = name.replace("-", "_")
                if name not in _FIELD_TYPES:
                    raise ConfigError(f"{path}: unknown setting {name!r}")
                values[name] = _coerce(name, v, base)
    for name, v in (overrides or {}).items():
        if v is None:
            continue
        if name not in _FIELD_TYPES:
            raise ConfigError(f"unknown setting {name!r}")
        values[name] = _coerce(name, v, None)
    cfg = PipelineConfig(**values)
    cfg.validate()
    return cfg

import json
import os
import shutil
from pathlib import Path

import pytest

from tropelens import cli
from tropelens.config import PipelineConfig, load_config
from tropelens.errors import ConfigError, MissingDependency
from tropelens.ingest import write_dataset
from tropelens.jsonl import write_jsonl
from tropelens.pipeline import (
    GENDEREDNESS,
    LOCK_FILE,
    emit_genre_plotdata,
    read_csv,
    run_pipeline,
    run_stage,
)
from tropelens.scoring import GenreScore

from conftest import MINI_CONFIG, MINI_DIR, make_corpus
from test_fetch import StubServer


def write_toml(tmp_path, text):
    p = tmp_path / "run.toml"
    p.write_text(text, encoding="utf-8")
    return p


# config

def test_config_sections_and_relative_paths(tmp_path):
    (tmp_path / "pages").mkdir()
    cfg = load_config(write_toml(tmp_path, 'seed = 3\n[inputs]\npages = "pages"\n[topics]\nk = 5\n'))
    assert cfg.seed == 3 and cfg.k == 5
    assert cfg.pages == tmp_path / "pages"


def test_overrides_win(tmp_path):
    cfg = load_config(write_toml(tmp_path, "[topics]\nk = 5\n"), {"k": 9, "seed": None})
    assert cfg.k == 9 and cfg.seed == 0


@pytest.mark.parametrize("text", [
    "nonsense = 1\n",
    "[topics]\nk = 'many'\n",
    "[topics]\nk = 1\n",
    "[classify]\ntrain_frac = 1.5\n",
    "[score]\ncount_mode = 'lemmas'\n",
    "[inputs]\npages = 'does/not/exist'\n",
    "k = = 3\n",
])
def test_bad_configs(tmp_path, text):
    with pytest.raises(ConfigError):
        load_config(write_toml(tmp_path, text))


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.toml")


def test_digest_ignores_output_dir_only():
    a, b = PipelineConfig(out=Path("x")), PipelineConfig(out=Path("y"))
    assert a.digest() == b.digest()
    assert a.digest() != PipelineConfig(seed=1).digest()


# stages

def mini_cfg(out, **overrides):
    return load_config(MINI_CONFIG, {"out": str(out), **overrides})


def test_score_then_topics(tmp_path):
    cfg = mini_cfg(tmp_path)
    for stage in ("ingest", "score", "topics"):
        run_stage(stage, cfg)
    doc = json.loads((tmp_path / "topics.json").read_text())
    assert doc["K"] == cfg.k and len(doc["topics"]) == cfg.k
    assert doc["meta"]["config_sha256"] == cfg.digest()


def test_topics_without_score(tmp_path):
    cfg = mini_cfg(tmp_path)
    run_stage("ingest", cfg)
    with pytest.raises(MissingDependency) as exc:
        run_stage("topics", cfg)
    assert exc.value.artifact == GENDEREDNESS


def test_headers_carry_config_digest(tmp_path):
    cfg = mini_cfg(tmp_path)
    run_stage("ingest", cfg)
    run_stage("score", cfg)
    first = (tmp_path / GENDEREDNESS).read_text().splitlines()[0]
    assert first == f"# tropelens 0.1.0 config_sha256={cfg.digest()}"
    rows = read_csv(tmp_path / GENDEREDNESS)
    assert len(rows) == 30
    assert sum(r["scored"] == "true" for r in rows) == 30


def test_optional_stages_skipped(tmp_path):
    cfg = load_config(None, {"out": str(tmp_path), "pages": str(MINI_DIR / "pages"), "k": 3, "subset": 10,
                             "min_tokens": 100, "iterations": 20})
    ran = run_pipeline(cfg)
    assert ran == ["ingest", "link", "score", "topics", "implicit", "report"]
    assert (tmp_path / "summary.json").exists()


def test_lock_blocks_second_writer(tmp_path):
    cfg = mini_cfg(tmp_path)
    (tmp_path / LOCK_FILE).write_text(str(os.getpid()))
    with pytest.raises(ConfigError):
        run_stage("ingest", cfg)
    (tmp_path / LOCK_FILE).write_text("999999999")
    run_stage("ingest", cfg)
    assert not (tmp_path / LOCK_FILE).exists()


def test_interrupted_jsonl_write_leaves_nothing(tmp_path):
    def records():
        yield {"a": 1}
        raise KeyboardInterrupt

    target = tmp_path / "links.jsonl"
    with pytest.raises(KeyboardInterrupt):
        write_jsonl(target, records())
    assert list(tmp_path.iterdir()) == []


def test_interrupted_dataset_write_keeps_old_dataset(tmp_path, monkeypatch):
    from tropelens.ingest import records

    write_dataset(make_corpus(), tmp_path / "dataset")
    before = {p.name: p.read_bytes() for p in (tmp_path / "dataset").iterdir()}
    calls = {"n": 0}
    real = records.write_jsonl

    def flaky(path, recs):
        calls["n"] += 1
        if calls["n"] == 2:
            raise OSError("disk full")
        real(path, recs)

    monkeypatch.setattr(records, "write_jsonl", flaky)
    with pytest.raises(OSError):
        write_dataset(make_corpus(), tmp_path / "dataset")
    assert {p.name: p.read_bytes() for p in (tmp_path / "dataset").iterdir()} == before
    assert [p.name for p in tmp_path.iterdir()] == ["dataset"]


# plot data

def plotdata(tmp_path, scores):
    path = tmp_path / "plot.csv"
    emit_genre_plotdata(scores, path, PipelineConfig())
    return path.read_text().splitlines()


def test_plotdata_sorted_ascending(tmp_path):
    lines = plotdata(tmp_path, {"Romance": GenreScore("Romance", 0.6, 3), "War": GenreScore("War", -0.4, 2)})
    assert lines[1:] == ["genre,mean_g,n_tropes", "War,-0.4,2", "Romance,0.6,3"]


def test_plotdata_single_and_empty(tmp_path):
    assert len(plotdata(tmp_path, {"War": GenreScore("War", -0.4, 2)})) == 3
    lines = plotdata(tmp_path, {})
    assert lines[0].startswith("# tropelens") and lines[1:] == ["genre,mean_g,n_tropes"]


# command line

def run_cli(*argv):
    return cli.main(list(argv))


def test_cli_exit_codes(tmp_path, capsys):
    assert run_cli("--config", str(tmp_path / "missing.toml"), "score") == 2
    out = str(tmp_path / "out")
    assert run_cli("--config", str(MINI_CONFIG), "--out", out, "topics") == 3
    assert "genderedness.csv" in capsys.readouterr().err
    assert run_cli("--config", str(MINI_CONFIG), "--out", out, "ingest") == 0
    ex = Path(out) / "dataset" / "examples.jsonl"
    ex.write_text(ex.read_text() + "{not json}\n")
    assert run_cli("--config", str(MINI_CONFIG), "--out", out, "score") == 4


def test_cli_subcommand_flags(tmp_path):
    out = str(tmp_path)
    base = ("--config", str(MINI_CONFIG), "--out", out)
    assert run_cli(*base, "ingest") == 0
    assert run_cli("score", *base, "--count-mode", "types") == 0
    assert json.loads((tmp_path / "corpus_gender.json").read_text())["count_mode"] == "types"
    assert run_cli(*base, "link") == 0
    assert run_cli(*base, "classify", "--task", "rating", "--C", "0.5", "--min-examples", "2") == 0
    metrics = json.loads((tmp_path / "classify_rating" / "metrics.json").read_text())
    assert set(metrics["classes"]) <= {"Low", "Medium", "High"}


def test_cli_version(capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli("--version")
    assert exc.value.code == 0
    assert "tropelens 0.1.0" in capsys.readouterr().out


def test_ingest_from_stub_server(tmp_path):
    server = StubServer()
    try:
        urls = []
        for page in sorted((MINI_DIR / "pages").glob("*.html"))[:3]:
            server.script[f"/pmwiki/pmwiki.php/Main/{page.stem}"] = [(200, page.read_text(encoding="utf-8"))]
            urls.append(f"{server.base}/pmwiki/pmwiki.php/Main/{page.stem}")
        (tmp_path / "urls.txt").write_text("# trope pages\n" + "\n".join(urls) + "\n")
        out = tmp_path / "out"
        rc = run_cli("ingest", "--out", str(out), "--urls", str(tmp_path / "urls.txt"), "--min-delay-ms", "5",
                     "--cache", str(tmp_path / "cache"))
        assert rc == 0
        tropes = (out / "dataset" / "tropes.jsonl").read_text().splitlines()
        assert len(tropes) == 3
        assert len(list((tmp_path / "cache").iterdir())) == 3
    finally:
        server.close()

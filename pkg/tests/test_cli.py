"""CLI subcommands, exit codes and manifest-replay determinism."""

import hashlib
import json
from pathlib import Path

import pytest

from debtscope.cli import main
from debtscope.corpus import LabelRecord, load_corpus, load_labels, save_corpus, save_labels
from debtscope.manifest import load_manifest
from debtscope.synth import make_synthetic_corpus


def run(*argv):
    return main(list(argv))


def file_hashes(paths):
    return {str(p): hashlib.sha256(Path(p).read_bytes()).hexdigest() for p in paths}


def replay_and_compare(manifest_path):
    """Re-run a command from its manifest; outputs must hash identically."""
    manifest = load_manifest(manifest_path)
    before = file_hashes(manifest["outputs"])
    assert run(*manifest["resolved_argv"]) == 0
    after = file_hashes(manifest["outputs"])
    assert after == before, f"replay of {manifest['command']} changed outputs"


@pytest.fixture
def jira_export(tmp_path):
    issues = []
    texts = [
        ("Refactor dependency handling", "Remove the cyclic dependency between core and client", True),
        ("Fix typo in tutorial", "The login page tutorial has a misprint", True),
        ("Decouple consumer", "Move client class to new package to reduce coupling", True),
        ("Update docs", "Pending work", False),
        ("Upgrade dependency", "The outdated library should move to a newer version", True),
    ]
    for i, (summary, description, resolved) in enumerate(texts, start=1):
        issues.append(
            {
                "key": f"DEMO-{i}",
                "fields": {
                    "summary": summary,
                    "description": description,
                    "resolution": {"name": "Fixed"} if resolved else None,
                },
            }
        )
    path = tmp_path / "export.json"
    path.write_text(json.dumps({"issues": issues}))
    return path


@pytest.fixture
def corpus_file(tmp_path):
    corpus, gold = make_synthetic_corpus(n_docs=80, seed=5)
    path = tmp_path / "corpus.jsonl"
    save_corpus(corpus, path)
    gold_path = tmp_path / "gold.jsonl"
    save_labels(
        [LabelRecord(d, "gold", lbl, final=lbl) for d, lbl in gold.items()], gold_path
    )
    return path, gold_path


class TestSampleSize:
    def test_prints_379(self, capsys):
        assert run("sample-size", "--population", "24823") == 0
        assert capsys.readouterr().out.strip() == "379"

    def test_all_reference_populations(self, capsys):
        table = {24823: 379, 18400: 377, 12195: 373, 1005: 279, 532: 224,
                 963: 275, 12: 12, 13: 13, 28: 27}
        for population, expected in table.items():
            assert run("sample-size", "--population", str(population)) == 0
            assert capsys.readouterr().out.strip() == str(expected)

    def test_no_fpc_prints_prose_figure(self, capsys):
        assert run("sample-size", "--population", "100000", "--no-fpc") == 0
        assert capsys.readouterr().out.strip() == "384"

    def test_invalid_population_exit_2(self, capsys):
        assert run("sample-size", "--population", "0") == 2


class TestExitCodes:
    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            run("sample-size", "--population", "10", "--bogus-flag")
        assert exc.value.code == 2

    def test_missing_file_runtime_error(self, tmp_path, capsys):
        code = run("filter", "--corpus", str(tmp_path / "nope.jsonl"),
                   "--keywords", str(tmp_path / "nokw.json"),
                   "--out", str(tmp_path / "out.jsonl"))
        assert code in (1, 2)


class TestIngest:
    def test_ingest_filters_unresolved(self, jira_export, tmp_path, capsys):
        out = tmp_path / "corpus.jsonl"
        assert run("ingest", "--input", str(jira_export), "--format", "jira-json",
                   "--out", str(out)) == 0
        corpus = load_corpus(out)
        assert len(corpus) == 4
        assert all(d.status == "resolved" for d in corpus)

    def test_ingest_replay_deterministic(self, jira_export, tmp_path):
        out = tmp_path / "corpus.jsonl"
        assert run("ingest", "--input", str(jira_export), "--format", "jira-json",
                   "--out", str(out)) == 0
        replay_and_compare(str(out) + ".manifest.json")


class TestExtractKeywords:
    def test_tfidf_extraction(self, jira_export, tmp_path):
        corpus_path = tmp_path / "corpus.jsonl"
        run("ingest", "--input", str(jira_export), "--format", "jira-json", "--out", str(corpus_path))
        out = tmp_path / "kw.json"
        assert run("extract-keywords", "--corpus", str(corpus_path), "--method", "tfidf",
                   "--ngrams", "1,2", "--top", "5", "--out", str(out)) == 0
        payload = json.loads(out.read_text())
        assert len(payload) == 2
        assert all(len(ks["entries"]) <= 5 for ks in payload)
        assert {"method", "n", "entries", "blacklist_hash"} <= set(payload[0])

    def test_seeded_blend_zero_equals_embedsim(self, jira_export, tmp_path):
        corpus_path = tmp_path / "corpus.jsonl"
        run("ingest", "--input", str(jira_export), "--format", "jira-json", "--out", str(corpus_path))
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert run("extract-keywords", "--corpus", str(corpus_path), "--method", "seeded",
                   "--blend", "0", "--ngrams", "1", "--out", str(a)) == 0
        assert run("extract-keywords", "--corpus", str(corpus_path), "--method", "embedsim",
                   "--ngrams", "1", "--out", str(b)) == 0
        entries_a = json.loads(a.read_text())[0]["entries"]
        entries_b = json.loads(b.read_text())[0]["entries"]
        assert entries_a == entries_b

    def test_replay_deterministic(self, jira_export, tmp_path):
        corpus_path = tmp_path / "corpus.jsonl"
        run("ingest", "--input", str(jira_export), "--format", "jira-json", "--out", str(corpus_path))
        out = tmp_path / "kw.json"
        assert run("extract-keywords", "--corpus", str(corpus_path), "--method", "seeded",
                   "--ngrams", "1,2", "--out", str(out)) == 0
        replay_and_compare(str(out) + ".manifest.json")


class TestFilter:
    def test_filter_pipeline(self, jira_export, tmp_path):
        corpus_path = tmp_path / "corpus.jsonl"
        run("ingest", "--input", str(jira_export), "--format", "jira-json", "--out", str(corpus_path))
        kw = tmp_path / "kw.json"
        run("extract-keywords", "--corpus", str(corpus_path), "--method", "tfidf",
            "--ngrams", "1,2", "--out", str(kw))
        out = tmp_path / "results.jsonl"
        assert run("filter", "--corpus", str(corpus_path), "--keywords", str(kw),
                   "--threshold", "0.9", "--out", str(out)) == 0
        results = [json.loads(line) for line in out.read_text().splitlines()]
        assert len(results) == 4
        assert all({"doc_id", "matched", "best_ngram", "best_keyword", "best_score"} <= set(r) for r in results)
        summary = json.loads((tmp_path / "results.jsonl.summary.json").read_text())
        assert summary["matched"] + summary["unmatched"] == 4
        assert summary["matched"] >= 1  # keywords extracted from the same corpus match it

    def test_replay_deterministic(self, jira_export, tmp_path):
        corpus_path = tmp_path / "corpus.jsonl"
        run("ingest", "--input", str(jira_export), "--format", "jira-json", "--out", str(corpus_path))
        kw = tmp_path / "kw.json"
        run("extract-keywords", "--corpus", str(corpus_path), "--method", "tfidf",
            "--ngrams", "1", "--out", str(kw))
        out = tmp_path / "results.jsonl"
        assert run("filter", "--corpus", str(corpus_path), "--keywords", str(kw),
                   "--out", str(out)) == 0
        replay_and_compare(str(out) + ".manifest.json")


class TestAdjudicate:
    def test_adjudication_rules(self, tmp_path):
        labels = tmp_path / "labels.jsonl"
        save_labels(
            [
                LabelRecord("D-1", "alice", "ATD"),
                LabelRecord("D-1", "bob", "ATD"),
                LabelRecord("D-2", "alice", "ATD", maybe_flag=True),
                LabelRecord("D-2", "bob", "NonATD"),
                LabelRecord("D-3", "alice", "ATD"),
                LabelRecord("D-3", "bob", "NonATD"),
                LabelRecord("D-3", "carol", "NonATD"),
            ],
            labels,
        )
        out = tmp_path / "final.jsonl"
        assert run("adjudicate", "--labels", str(labels),
                   "--tiebreaker-annotator", "carol", "--out", str(out)) == 0
        finals = {r.doc_id: r.final for r in load_labels(out)}
        assert finals == {"D-1": "ATD", "D-2": "WeakATD", "D-3": "NonATD"}


class TestEvaluate:
    def test_metrics_files(self, tmp_path):
        pred = tmp_path / "pred.jsonl"
        gold = tmp_path / "gold.jsonl"
        save_labels([LabelRecord(f"D-{i}", "m", "ATD" if i % 2 else "NonATD") for i in range(10)], pred)
        save_labels([LabelRecord(f"D-{i}", "g", "ATD" if i % 3 else "NonATD") for i in range(10)], gold)
        out = tmp_path / "metrics.json"
        assert run("evaluate", "--pred", str(pred), "--gold", str(gold), "--out", str(out)) == 0
        payload = json.loads(out.read_text())
        assert {"precision", "recall", "f1", "confusion"} <= set(payload)
        csv_lines = (tmp_path / "metrics.json.csv").read_text().splitlines()
        assert csv_lines[0] == "precision,recall,f1,tp,fp,fn,tn"


class TestSimulate:
    def test_writes_curves_and_manifest(self, tmp_path):
        out_dir = tmp_path / "curves"
        assert run("simulate", "--synthetic", "120", "--strategy", "breaking-ties",
                   "--runs", "3", "--iterations", "2", "--seed-size", "10",
                   "--batch", "10", "--epochs", "40", "--out", str(out_dir)) == 0
        curves = sorted(out_dir.glob("curve_*.csv"))
        assert len(curves) == 3
        header = curves[0].read_text().splitlines()[0]
        assert header == "iteration,labeled_count,precision,recall,f1"
        assert (out_dir / "manifest.json").exists()
        run_manifests = sorted(out_dir.glob("run_*.json"))
        assert len(run_manifests) == 3
        payload = json.loads(run_manifests[0].read_text())
        assert {"strategy", "rng_seed", "classifier", "curve"} <= set(payload)
        assert len(payload["curve"]) == 3  # iterations + seed point

    def test_replay_deterministic(self, tmp_path):
        out_dir = tmp_path / "curves"
        assert run("simulate", "--synthetic", "120", "--strategy", "random",
                   "--runs", "2", "--iterations", "2", "--seed-size", "10",
                   "--batch", "10", "--epochs", "40", "--out", str(out_dir)) == 0
        replay_and_compare(out_dir / "manifest.json")

    def test_corpus_requires_gold(self, corpus_file, tmp_path, capsys):
        corpus_path, _ = corpus_file
        assert run("simulate", "--corpus", str(corpus_path),
                   "--out", str(tmp_path / "x")) == 2


class TestExplainCommand:
    def test_lime_and_shap_outputs(self, corpus_file, tmp_path):
        corpus_path, gold_path = corpus_file
        for method in ("lime", "shap"):
            out = tmp_path / f"{method}.json"
            assert run("explain", "--corpus", str(corpus_path), "--labels", str(gold_path),
                       "--doc-id", "SYN-1", "--method", method, "--epochs", "60",
                       "--out", str(out)) == 0
            payload = json.loads(out.read_text())
            assert payload["method"] == method
            assert payload["doc_id"] == "SYN-1"

    def test_replay_deterministic(self, corpus_file, tmp_path):
        corpus_path, gold_path = corpus_file
        out = tmp_path / "exp.json"
        assert run("explain", "--corpus", str(corpus_path), "--labels", str(gold_path),
                   "--doc-id", "SYN-2", "--method", "lime", "--epochs", "60",
                   "--out", str(out)) == 0
        replay_and_compare(str(out) + ".manifest.json")

    def test_unknown_doc_exit_2(self, corpus_file, tmp_path):
        corpus_path, gold_path = corpus_file
        assert run("explain", "--corpus", str(corpus_path), "--labels", str(gold_path),
                   "--doc-id", "NOPE-1", "--epochs", "40",
                   "--out", str(tmp_path / "x.json")) == 2


class TestSeedEnvOverride:
    def test_debtscope_seed_env(self, jira_export, tmp_path, monkeypatch):
        corpus_path = tmp_path / "corpus.jsonl"
        run("ingest", "--input", str(jira_export), "--format", "jira-json", "--out", str(corpus_path))
        out = tmp_path / "kw.json"
        monkeypatch.setenv("DEBTSCOPE_SEED", "77")
        run("extract-keywords", "--corpus", str(corpus_path), "--method", "embedsim",
            "--ngrams", "1", "--out", str(out))
        manifest = load_manifest(str(out) + ".manifest.json")
        assert manifest["seeds"] == {"provider": 77}

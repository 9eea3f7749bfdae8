"""Acceptance suite: one test per exit criterion, each printing PASS/FAIL.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. Every tolerance is pinned here; nothing is deferred to later
calibration.
"""

import hashlib
import json
import math
import time
from pathlib import Path

import numpy as np
import pytest

from debtscope.active import (
    ActiveRun,
    area_under_curve,
    labels_to_reach,
    run_simulation,
    select_batch,
)
from debtscope.classify import ClassifierSpec, ProbVector, fit, predict_proba, softmax_loss_grad
from debtscope.cli import main as cli_main
from debtscope.corpus import LabelRecord
from debtscope.embed import HashedBowProvider, cosine
from debtscope.explain import ExplainConfig, explain_lime, explain_shap
from debtscope.filtering import FilterConfig, filter_corpus, filter_doc
from debtscope.keywords import KeywordEntry, KeywordSet
from debtscope.manifest import load_manifest
from debtscope.stats import SampleSpec, adjudicate, cohens_kappa, compute_metrics, sample_size
from debtscope.synth import make_synthetic_corpus
from debtscope.textprep import TokenizedDoc


def report(name: str, ok: bool, detail: str = ""):
    line = f"{'PASS' if ok else 'FAIL'}: {name}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert ok, line


# ---------------------------------------------------------------------------


def test_criterion_sample_size_table():
    """All nine finite-population sample sizes, exact, under a second."""
    table = {24823: 379, 18400: 377, 12195: 373, 1005: 279, 532: 224,
             963: 275, 12: 12, 13: 13, 28: 27}
    start = time.monotonic()
    results = {n: sample_size(SampleSpec(population=n)) for n in table}
    elapsed = time.monotonic() - start
    ok = results == table and elapsed < 1.0
    report("sample-size table (nine exact values, <1s)", ok,
           f"{sum(results[n] == table[n] for n in table)}/9 exact, {elapsed:.3f}s")


def test_criterion_iteration_arithmetic():
    """Seed 100 + batch 100 reaches 1,700 labels at iter 16 and 2,600 at 25."""
    start = time.monotonic()
    corpus, gold = make_synthetic_corpus(n_docs=3400, seed=7)
    run = ActiveRun(
        strategy="random",
        classifier_spec=ClassifierSpec(kind="logistic", epochs=200, lr=2.0),
        seed_size=100,
        batch_size=100,
        iterations=25,
        rng_seed=0,
    )
    out = run_simulation(run, corpus, gold)
    counts = {row["iteration"]: row["labeled_count"] for row in out.curve}
    elapsed = time.monotonic() - start
    ok = counts[16] == 1700 and counts[25] == 2600 and elapsed < 60.0
    report("iteration arithmetic (1,700 @ iter 16; 2,600 @ iter 25)", ok,
           f"iter16={counts[16]}, iter25={counts[25]}, {elapsed:.1f}s")


def test_criterion_strategy_direction():
    """Breaking ties beats random on AULC and label efficiency (>=8/10 seeds)."""
    start = time.monotonic()
    corpus, gold = make_synthetic_corpus(n_docs=3000, seed=7)
    spec = ClassifierSpec(kind="logistic", epochs=200, lr=2.0)

    def simulate(strategy, seed):
        run = ActiveRun(strategy=strategy, classifier_spec=spec, seed_size=100,
                        batch_size=100, iterations=10, rng_seed=seed)
        return run_simulation(run, corpus, gold)

    aulc_bt, aulc_rd, joint_wins = [], [], 0
    for seed in range(10):
        bt = simulate("breaking-ties", seed)
        rd = simulate("random", seed)
        a_bt, a_rd = area_under_curve(bt.curve), area_under_curve(rd.curve)
        aulc_bt.append(a_bt)
        aulc_rd.append(a_rd)
        rand_final_f1 = rd.curve[-1]["f1"]
        rand_labels = rd.curve[-1]["labeled_count"]
        reach = labels_to_reach(bt.curve, rand_final_f1)
        efficient = reach is not None and reach <= 0.7 * rand_labels
        if a_bt >= a_rd and efficient:
            joint_wins += 1
    elapsed = time.monotonic() - start
    mean_ok = float(np.mean(aulc_bt)) >= float(np.mean(aulc_rd))
    ok = mean_ok and joint_wins >= 8 and elapsed < 300.0
    report("strategy direction (AULC + 70%-label efficiency)", ok,
           f"mean AULC bt={np.mean(aulc_bt):.4f} rd={np.mean(aulc_rd):.4f}, "
           f"joint wins {joint_wins}/10, {elapsed:.1f}s")


def test_criterion_binary_equivalence():
    """Least-confidence and breaking-ties pick identical binary batches."""
    rng = np.random.Generator(np.random.PCG64(41))
    all_equal = True

    class Stub:
        def __init__(self, table):
            self.table = table

        def predict_proba(self, doc):
            return ProbVector(("ATD", "NonATD"), np.asarray(self.table[doc.doc_id]))

    for trial in range(25):
        n = int(rng.integers(5, 60))
        pool = [TokenizedDoc(f"d{i}", [f"d{i}"]) for i in range(n)]
        p = rng.uniform(0.01, 0.99, size=n)
        model = Stub({f"d{i}": [p[i], 1 - p[i]] for i in range(n)})
        batch = int(rng.integers(1, n + 1))
        gen = np.random.Generator(np.random.PCG64(trial))
        lc = select_batch("least-confidence", model, pool, [], None, batch, gen)
        bt = select_batch("breaking-ties", model, pool, [], None, batch, gen)
        if set(lc) != set(bt):
            all_equal = False
            break

    # also on a real trained model
    corpus, gold = make_synthetic_corpus(n_docs=200, seed=9)
    run = ActiveRun(strategy="random", classifier_spec=ClassifierSpec(kind="logistic", epochs=80, lr=2.0),
                    seed_size=20, batch_size=20, iterations=0, rng_seed=1)
    from debtscope.active import label_merge_config
    from debtscope.textprep import PrepConfig, preprocess

    merge = label_merge_config("true-plus-weak")
    tokenized = {doc.id: preprocess(doc, PrepConfig()) for doc in corpus}
    training = [(tokenized[d], merge[gold[d]]) for d in list(gold)[:60]]
    model = fit(ClassifierSpec(kind="logistic", epochs=80, lr=2.0), training)
    pool = [tokenized[d] for d in list(gold)[60:]]
    gen = np.random.Generator(np.random.PCG64(0))
    lc = select_batch("least-confidence", model, pool, [], None, 15, gen)
    bt = select_batch("breaking-ties", model, pool, [], None, 15, gen)
    real_equal = set(lc) == set(bt)

    report("binary equivalence of least-confidence and breaking-ties",
           all_equal and real_equal)


class _OracleModel:
    """p(ATD) from an arbitrary function of the token set."""

    def __init__(self, fn):
        self.fn = fn

    def predict_proba(self, doc):
        p = float(self.fn(set(doc.tokens)))
        return ProbVector(("ATD", "NonATD"), np.array([p, 1.0 - p]))


def _textbook_shapley(value_fn, n):
    import itertools

    fact = [math.factorial(i) for i in range(n + 1)]
    phi = [0.0] * n
    for i in range(n):
        others = [j for j in range(n) if j != i]
        for size in range(n):
            for subset in itertools.combinations(others, size):
                w = fact[len(subset)] * fact[n - len(subset) - 1] / fact[n]
                phi[i] += w * (value_fn(set(subset) | {i}) - value_fn(set(subset)))
    return phi


def test_criterion_shapley_correctness():
    """Exact phi vs enumeration (1e-9); sampled MAE < 0.05; efficiency holds."""
    rng = np.random.Generator(np.random.PCG64(55))
    exact_ok = True
    for n_tokens in (4, 6, 8):
        tokens = [f"t{i}" for i in range(n_tokens)]
        cache = {}

        def fn(present, _cache=cache, _rng=rng):
            key = frozenset(present)
            if key not in _cache:
                _cache[key] = float(_rng.uniform())
            return _cache[key]

        model = _OracleModel(lambda present, f=fn: f(present))
        doc = TokenizedDoc("d", tokens)
        got = explain_shap(model, doc, "ATD")
        want = _textbook_shapley(lambda idx: fn({tokens[i] for i in idx}), n_tokens)
        if not np.allclose([w.weight for w in got.weights], want, atol=1e-9):
            exact_ok = False
        gap = abs(got.base_value + sum(w.weight for w in got.weights)
                  - model.predict_proba(doc).prob_of("ATD"))
        if gap > 1e-6:
            exact_ok = False

    # sampled mode vs exact on an 8-token additive-ish fixture
    tokens = [f"s{i}" for i in range(8)]
    coefs = {t: float(v) for t, v in zip(tokens, np.linspace(-0.08, 0.08, 8))}
    model = _OracleModel(lambda present: 0.5 + sum(coefs[t] for t in present))
    doc = TokenizedDoc("d", tokens)
    exact = explain_shap(model, doc, "ATD", ExplainConfig(shap_exact_max_tokens=12))
    sampled = explain_shap(
        model, doc, "ATD",
        ExplainConfig(shap_exact_max_tokens=7, shap_num_permutations=2048, rng_seed=3),
    )
    exact_w = {w.token: w.weight for w in exact.weights}
    sampled_w = {w.token: w.weight for w in sampled.weights}
    mae = float(np.mean([abs(exact_w[t] - sampled_w[t]) for t in tokens]))
    sampled_gap = abs(sampled.base_value + sum(w.weight for w in sampled.weights)
                      - model.predict_proba(doc).prob_of("ATD"))
    # force-plot arithmetic: base 0.21 + sum(phi) 0.72 = 0.93
    force = _OracleModel(lambda present: 0.21 + 0.36 * ("a" in present) + 0.36 * ("b" in present))
    force_out = explain_shap(force, TokenizedDoc("f", ["a", "b"]), "ATD")
    force_ok = (
        abs(force_out.base_value - 0.21) < 1e-9
        and abs(sum(w.weight for w in force_out.weights) - 0.72) < 1e-9
    )
    ok = exact_ok and mae < 0.05 and sampled_gap <= 0.02 and force_ok
    report("Shapley correctness (exact 1e-9, sampled MAE<0.05, efficiency)", ok,
           f"sampled MAE={mae:.4f}, efficiency gap={sampled_gap:.2e}")


def test_criterion_lime_fidelity():
    """Sign agreement >=90% on top-5 planted coefficients over 20 seeds."""
    coefs = {"pos1": 2.0, "pos2": 1.5, "pos3": 1.0, "neg1": -2.0, "neg2": -1.2,
             "zero1": 0.0, "zero2": 0.0, "zero3": 0.0}
    tokens = list(coefs)

    def fn(present):
        raw = sum(c for t, c in coefs.items() if t in present)
        return 1.0 / (1.0 + math.exp(-raw))

    model = _OracleModel(fn)
    doc = TokenizedDoc("d", tokens)
    agree = total = 0
    for seed in range(20):
        out = explain_lime(model, doc, "ATD", ExplainConfig(rng_seed=seed, lime_top_k=5))
        for w in out.weights:
            total += 1
            planted = coefs[w.token]
            if planted != 0.0 and math.copysign(1, w.weight) == math.copysign(1, planted):
                agree += 1
    rate = agree / total

    constant = _OracleModel(lambda present: 0.5)
    const_out = explain_lime(constant, doc, "ATD", ExplainConfig(rng_seed=0))
    const_ok = all(abs(w.weight) < 1e-9 for w in const_out.weights)

    ok = rate >= 0.9 and const_ok
    report("LIME fidelity (sign agreement >=90%, constant model all-zero)", ok,
           f"agreement {agree}/{total} = {rate:.2%}")


def test_criterion_filter_oracle_equivalence():
    """filter_doc == brute-force scan on 200 random docs; threshold monotone."""
    from tests.test_filtering import VOCAB, brute_force_filter, keyword_set

    provider = HashedBowProvider(dimension=4096, seed=1)
    config = FilterConfig(
        keyword_set=keyword_set(["cyclic depend", "refactor", "decoupl", "architectur"]),
        provider=provider,
        threshold=0.9,
        ngram_sizes=(1, 2),
    )
    rng = np.random.Generator(np.random.PCG64(71))
    equal = 0
    docs = []
    for i in range(200):
        count = int(rng.integers(0, 12))
        doc = TokenizedDoc(f"a{i}", [VOCAB[int(j)] for j in rng.integers(0, len(VOCAB), size=count)])
        docs.append(doc)
        got = filter_doc(doc, config)
        want = brute_force_filter(doc, config)
        if (got.matched, got.best_score, got.best_ngram, got.best_keyword) == (
            want.matched, want.best_score, want.best_ngram, want.best_keyword
        ):
            equal += 1
    counts = []
    for threshold in (0.5, 0.7, 0.9, 0.95):
        cfg = FilterConfig(keyword_set=config.keyword_set, provider=provider,
                           threshold=threshold, ngram_sizes=(1, 2))
        _, summary = filter_corpus(docs, cfg)
        counts.append(summary["matched"])
    monotone = counts == sorted(counts, reverse=True)
    ok = equal == 200 and monotone
    report("filter oracle equivalence + threshold monotonicity", ok,
           f"{equal}/200 exact, matched counts {counts}")


def test_criterion_metrics_kappa_oracles():
    """Metrics and kappa match brute force on 1,000 vectors; adjudication cases."""
    from tests.test_stats import confusion_oracle, kappa_oracle

    rng = np.random.Generator(np.random.PCG64(13))
    metrics_ok = kappa_ok = True
    for _ in range(1000):
        n = int(rng.integers(2, 40))
        predicted = rng.integers(0, 2, size=n).tolist()
        gold = rng.integers(0, 2, size=n).tolist()
        m = compute_metrics(predicted, gold, positive=1)
        tp, fp, fn, tn = confusion_oracle(predicted, gold, 1)
        ref_p = tp / (tp + fp) if tp + fp else 0.0
        ref_r = tp / (tp + fn) if tp + fn else 0.0
        ref_f1 = 2 * ref_p * ref_r / (ref_p + ref_r) if ref_p + ref_r else 0.0
        if not (abs(m.precision - ref_p) < 1e-12 and abs(m.recall - ref_r) < 1e-12
                and abs(m.f1 - ref_f1) < 1e-12):
            metrics_ok = False
        if abs(cohens_kappa(predicted, gold) - kappa_oracle(predicted, gold)) > 1e-12:
            kappa_ok = False

    identity_ok = all(
        cohens_kappa(v, v) == 1.0
        for v in (["A", "B", "A"], ["A"] * 5 + ["B"] * 3, ["x", "y", "z"])
    )

    def rec(annotator, label, maybe=False):
        return LabelRecord("D-1", annotator, label, maybe_flag=maybe)

    adjudication_ok = (
        adjudicate([rec("a", "ATD"), rec("b", "ATD")]) == "ATD"
        and adjudicate([rec("a", "ATD", maybe=True), rec("b", "NonATD")]) == "WeakATD"
        and adjudicate([rec("a", "NonATD", maybe=True), rec("b", "ATD")]) == "NonATD"
        and adjudicate([rec("a", "ATD"), rec("b", "NonATD")], tiebreaker="NonATD") == "NonATD"
    )
    ok = metrics_ok and kappa_ok and identity_ok and adjudication_ok
    report("metrics/kappa oracles + adjudication resolution cases", ok)


def test_criterion_logistic_gradient():
    """Analytic vs central-difference gradient, relative error < 1e-5."""
    rng = np.random.Generator(np.random.PCG64(3))
    worst = 0.0
    for trial in range(5):
        n, d, c = 16, 10, 2
        X = rng.normal(size=(n, d))
        Y = np.zeros((n, c))
        for i in range(n):
            Y[i, int(rng.integers(c))] = 1.0
        W = rng.normal(size=(d, c)) * 0.4
        b = rng.normal(size=c) * 0.2
        l2 = 0.5
        _, grad_w, _ = softmax_loss_grad(X, Y, W, b, l2)
        h = 1e-6
        for i in range(d):
            for j in range(c):
                Wp, Wm = W.copy(), W.copy()
                Wp[i, j] += h
                Wm[i, j] -= h
                lp, _, _ = softmax_loss_grad(X, Y, Wp, b, l2)
                lm, _, _ = softmax_loss_grad(X, Y, Wm, b, l2)
                numeric = (lp - lm) / (2 * h)
                rel = abs(grad_w[i, j] - numeric) / max(abs(numeric), 1e-8)
                worst = max(worst, rel)
    ok = worst < 1e-5
    report("logistic gradient vs finite differences (<1e-5 relative)", ok,
           f"worst relative error {worst:.2e}")


def test_criterion_cli_determinism(tmp_path):
    """Replaying any command from its manifest reproduces identical hashes."""

    def hashes(paths):
        return {p: hashlib.sha256(Path(p).read_bytes()).hexdigest() for p in paths}

    issues = [
        {"key": f"DEMO-{i}", "fields": {"summary": f"Refactor dependency {i}",
                                        "description": "cyclic coupling between modules",
                                        "resolution": {"name": "Fixed"}}}
        for i in range(1, 9)
    ]
    export = tmp_path / "export.json"
    export.write_text(json.dumps({"issues": issues}))

    corpus_path = tmp_path / "corpus.jsonl"
    kw_path = tmp_path / "kw.json"
    results_path = tmp_path / "results.jsonl"
    curves_dir = tmp_path / "curves"

    commands = [
        ["ingest", "--input", str(export), "--format", "jira-json", "--out", str(corpus_path)],
        ["extract-keywords", "--corpus", str(corpus_path), "--method", "seeded",
         "--ngrams", "1,2", "--out", str(kw_path)],
        ["filter", "--corpus", str(corpus_path), "--keywords", str(kw_path),
         "--out", str(results_path)],
        ["simulate", "--synthetic", "150", "--strategy", "breaking-ties", "--runs", "2",
         "--iterations", "2", "--seed-size", "10", "--batch", "10", "--epochs", "40",
         "--out", str(curves_dir)],
    ]
    manifest_paths = [
        str(corpus_path) + ".manifest.json",
        str(kw_path) + ".manifest.json",
        str(results_path) + ".manifest.json",
        str(curves_dir / "manifest.json"),
    ]
    all_ok = True
    for argv, manifest_path in zip(commands, manifest_paths):
        assert cli_main(argv) == 0
        manifest = load_manifest(manifest_path)
        before = hashes(manifest["outputs"])
        assert cli_main(manifest["resolved_argv"]) == 0
        after = hashes(manifest["outputs"])
        if before != after:
            all_ok = False
    report("CLI determinism (manifest replay, hash-identical outputs)", all_ok)

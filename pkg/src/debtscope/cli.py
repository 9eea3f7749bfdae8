"""Command-line entry point for the batch pipeline and experiments.

Every artifact-producing command writes a run manifest with pinned seeds,
timestamps and input hashes; replaying a manifest's resolved argv
reproduces the artifacts byte for byte. Exit codes: 0 success, 2
validation error, 1 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence

from . import __version__, corpus as corpus_mod, keywords as keywords_mod
from .active import ActiveRun, run_simulation
from .classify import ClassifierSpec, fit
from .corpus import LABEL_ATD, LABEL_WEAK_ATD, load_corpus, load_labels, save_corpus, save_labels
from .embed import HashedBowProvider
from .explain import ExplainConfig, explain_lime, explain_shap
from .filtering import FilterConfig, filter_corpus
from .keywords import (
    DEFAULT_SEEDS,
    KeywordEntry,
    KeywordSet,
    SeedKeywordSet,
    extract_embedsim,
    extract_seeded,
    extract_tfidf,
    load_keyword_sets,
    save_keyword_sets,
)
from .manifest import RunManifest, utc_now
from .stats import SampleSpec, adjudicate_all, compute_metrics, sample_size, sample_size_uncorrected
from .synth import make_synthetic_corpus
from .textprep import PrepConfig, preprocess


def _seed_from_env(seed: int) -> int:
    env = os.environ.get("DEBTSCOPE_SEED")
    return int(env) if env else seed


def _prep_from_args(args) -> PrepConfig:
    return PrepConfig(
        stem=not args.no_stem,
        remove_stopwords=not args.keep_stopwords,
        min_token_len=args.min_token_len,
    )


def _add_prep_flags(parser):
    parser.add_argument("--no-stem", action="store_true", help="disable stemming")
    parser.add_argument("--keep-stopwords", action="store_true", help="keep stop words")
    parser.add_argument("--min-token-len", type=int, default=1)


def _parse_ngrams(value: str) -> List[int]:
    sizes = sorted({int(part) for part in value.split(",") if part.strip()})
    if not sizes or not set(sizes) <= {1, 2, 3}:
        raise ValueError(f"--ngrams must be a subset of 1,2,3 (got {value!r})")
    return sizes


def _final_labels(records) -> Dict[str, str]:
    labels = {}
    for rec in records:
        labels[rec.doc_id] = rec.final or rec.label
    return labels


# ---------------------------------------------------------------- commands


def cmd_ingest(args) -> int:
    ingest_time = args.ingest_time or utc_now()
    manifest = RunManifest("ingest", args._argv)
    manifest.add_input(args.input)
    loaded = corpus_mod.ingest(
        args.input, format=args.format, source_path=str(args.input), ingest_time=ingest_time
    )
    save_corpus(loaded, args.out)
    manifest.add_output(args.out)
    manifest.config = {"format": args.format, "ingest_time": ingest_time}
    manifest.resolved_argv = [
        "ingest", "--input", str(args.input), "--format", args.format,
        "--out", str(args.out), "--ingest-time", ingest_time,
    ]
    manifest.write(Path(str(args.out) + ".manifest.json"))
    counts = loaded.manifest["counts"]
    print(
        f"ingested {counts['resolved']} resolved documents "
        f"({counts['unresolved']} unresolved skipped, {counts['rejected']} rejected)"
    )
    return 0


def cmd_extract_keywords(args) -> int:
    seed = _seed_from_env(args.seed)
    prep = _prep_from_args(args)
    manifest = RunManifest("extract-keywords", args._argv)
    manifest.add_input(args.corpus)
    loaded = load_corpus(args.corpus)
    docs = [preprocess(doc, prep) for doc in loaded]
    if args.labels:
        manifest.add_input(args.labels)
        labels = _final_labels(load_labels(args.labels))
        positive = {LABEL_ATD, LABEL_WEAK_ATD} if args.include_weak else {LABEL_ATD}
        keep = {doc_id for doc_id, lbl in labels.items() if lbl in positive}
        docs = [d for d in docs if d.doc_id in keep]
    if not docs:
        print("no documents to extract keywords from", file=sys.stderr)
        return 2
    blacklist = []
    if args.blacklist:
        manifest.add_input(args.blacklist)
        blacklist = [
            line.strip()
            for line in Path(args.blacklist).read_text("utf-8").splitlines()
            if line.strip()
        ]
    provider = HashedBowProvider(dimension=args.dim, seed=seed, prep=prep)
    sizes = _parse_ngrams(args.ngrams)
    sets = []
    for n in sizes:
        if args.method == "tfidf":
            ks = extract_tfidf(docs, n=n, top_k=args.top, blacklist=blacklist)
        elif args.method == "embedsim":
            ks = extract_embedsim(docs, provider, n=n, top_k=args.top, blacklist=blacklist)
        else:
            seeds = SeedKeywordSet(args.seeds.split(",") if args.seeds else list(DEFAULT_SEEDS))
            ks = extract_seeded(
                docs, provider, seeds, n=n, top_k=args.top, blend=args.blend, blacklist=blacklist
            )
        sets.append(ks)
    save_keyword_sets(sets, args.out, blacklist)
    manifest.add_output(args.out)
    manifest.seeds = {"provider": seed}
    manifest.config = {
        "method": args.method, "ngrams": sizes, "top": args.top, "blend": args.blend,
        "prep": prep.to_dict(), "dim": args.dim,
    }
    manifest.resolved_argv = (
        ["extract-keywords", "--corpus", str(args.corpus), "--method", args.method,
         "--ngrams", ",".join(map(str, sizes)), "--top", str(args.top),
         "--blend", str(args.blend), "--dim", str(args.dim), "--seed", str(seed),
         "--out", str(args.out)]
        + (["--labels", str(args.labels)] if args.labels else [])
        + (["--include-weak"] if args.include_weak else [])
        + (["--blacklist", str(args.blacklist)] if args.blacklist else [])
        + (["--seeds", args.seeds] if args.seeds else [])
        + (["--no-stem"] if args.no_stem else [])
        + (["--keep-stopwords"] if args.keep_stopwords else [])
        + ["--min-token-len", str(args.min_token_len)]
    )
    manifest.write(Path(str(args.out) + ".manifest.json"))
    total = sum(len(ks.entries) for ks in sets)
    print(f"extracted {total} keywords across {len(sizes)} n-gram sizes -> {args.out}")
    return 0


def cmd_filter(args) -> int:
    seed = _seed_from_env(args.seed)
    prep = _prep_from_args(args)
    manifest = RunManifest("filter", args._argv)
    manifest.add_input(args.corpus)
    manifest.add_input(args.keywords)
    loaded = load_corpus(args.corpus)
    docs = [preprocess(doc, prep) for doc in loaded]
    sets = load_keyword_sets(args.keywords)
    entries = [entry for ks in sets for entry in ks.entries]
    merged = KeywordSet(method=sets[0].method if sets else "tfidf", entries=entries, top_k=len(entries))
    provider = HashedBowProvider(dimension=args.dim, seed=seed, prep=prep)
    config = FilterConfig(
        keyword_set=merged,
        provider=provider,
        threshold=args.threshold,
        ngram_sizes=tuple(_parse_ngrams(args.ngrams)),
    )
    results, summary = filter_corpus(docs, config)
    out = Path(args.out)
    lines = [json.dumps(r.to_record(), ensure_ascii=False, separators=(",", ":")) for r in results]
    out.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    summary_path = Path(str(args.out) + ".summary.json")
    summary_path.write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    manifest.add_output(out)
    manifest.add_output(summary_path)
    manifest.seeds = {"provider": seed}
    manifest.config = {
        "threshold": args.threshold, "ngrams": _parse_ngrams(args.ngrams),
        "prep": prep.to_dict(), "dim": args.dim,
    }
    manifest.resolved_argv = (
        ["filter", "--corpus", str(args.corpus), "--keywords", str(args.keywords),
         "--threshold", str(args.threshold), "--ngrams", args.ngrams,
         "--dim", str(args.dim), "--seed", str(seed), "--out", str(args.out)]
        + (["--no-stem"] if args.no_stem else [])
        + (["--keep-stopwords"] if args.keep_stopwords else [])
        + ["--min-token-len", str(args.min_token_len)]
    )
    manifest.write(Path(str(args.out) + ".manifest.json"))
    print(f"matched {summary['matched']} / {len(results)} documents")
    return 0


def cmd_sample_size(args) -> int:
    spec = SampleSpec(
        population=args.population,
        confidence=args.confidence,
        margin=args.margin,
        proportion=args.proportion,
    )
    if args.no_fpc:
        # the uncorrected figure is conventionally quoted rounded down (384)
        value = min(args.population, int(sample_size_uncorrected(spec)))
    else:
        value = sample_size(spec)
    print(value)
    return 0


def cmd_adjudicate(args) -> int:
    manifest = RunManifest("adjudicate", args._argv)
    manifest.add_input(args.labels)
    records = load_labels(args.labels)
    tiebreakers = {}
    if args.tiebreaker_annotator:
        pair_records = []
        for rec in records:
            if rec.annotator == args.tiebreaker_annotator:
                tiebreakers[rec.doc_id] = rec.label
            else:
                pair_records.append(rec)
        records = pair_records
    adjudicated = stats_adjudicate_sorted(records, tiebreakers)
    save_labels(adjudicated, args.out)
    unresolved = sorted({r.doc_id for r in adjudicated if r.final is None})
    manifest.add_output(args.out)
    manifest.config = {"tiebreaker_annotator": args.tiebreaker_annotator}
    manifest.resolved_argv = (
        ["adjudicate", "--labels", str(args.labels), "--out", str(args.out)]
        + (["--tiebreaker-annotator", args.tiebreaker_annotator] if args.tiebreaker_annotator else [])
    )
    manifest.write(Path(str(args.out) + ".manifest.json"))
    print(f"adjudicated {len({r.doc_id for r in adjudicated})} documents; {len(unresolved)} unresolved")
    for doc_id in unresolved:
        print(f"needs adjudication: {doc_id}", file=sys.stderr)
    return 0


def stats_adjudicate_sorted(records, tiebreakers):
    out = adjudicate_all(records, tiebreakers)
    out.sort(key=lambda r: (r.doc_id, r.annotator))
    return out


def _classifier_spec_from_args(args, seed: int) -> ClassifierSpec:
    return ClassifierSpec(
        kind=args.classifier,
        features=args.features,
        l2=args.l2,
        epochs=args.epochs,
        lr=args.lr,
        nb_alpha=args.nb_alpha,
        rng_seed=seed,
    )


def cmd_simulate(args) -> int:
    seed = _seed_from_env(args.seed)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest("simulate", args._argv)
    if args.corpus:
        manifest.add_input(args.corpus)
        loaded = load_corpus(args.corpus)
        if not args.gold:
            print("--gold is required with --corpus", file=sys.stderr)
            return 2
        manifest.add_input(args.gold)
        gold = _final_labels(load_labels(args.gold))
    else:
        loaded, gold = make_synthetic_corpus(n_docs=args.synthetic, seed=seed)
    spec = _classifier_spec_from_args(args, seed)

    def one_run(k: int) -> List[Path]:
        run = ActiveRun(
            strategy=args.strategy,
            classifier_spec=spec,
            seed_size=args.seed_size,
            batch_size=args.batch,
            iterations=args.iterations,
            rng_seed=seed + k,
            merge_mode=args.merge,
            holdout_fraction=args.holdout,
        )
        result = run_simulation(run, loaded, gold)
        from .active import curve_to_csv

        stem = f"{args.strategy}_seed{seed + k}"
        csv_path = out_dir / f"curve_{stem}.csv"
        csv_path.write_text(curve_to_csv(result.curve), encoding="utf-8")
        run_manifest = out_dir / f"run_{stem}.json"
        run_manifest.write_text(
            json.dumps(
                {
                    "strategy": run.strategy,
                    "seed_size": run.seed_size,
                    "batch_size": run.batch_size,
                    "iterations": run.iterations,
                    "rng_seed": run.rng_seed,
                    "merge_mode": run.merge_mode,
                    "holdout_fraction": run.holdout_fraction,
                    "classifier": spec.to_dict(),
                    "curve": result.curve,
                },
                sort_keys=True,
                indent=2,
            )
            + "\n",
            encoding="utf-8",
        )
        return [csv_path, run_manifest]

    with ThreadPoolExecutor(max_workers=min(args.runs, os.cpu_count() or 1)) as pool:
        path_groups = list(pool.map(one_run, range(args.runs)))
    curve_count = 0
    for group in path_groups:
        curve_count += 1
        for path in group:
            manifest.add_output(path)
    manifest.seeds = {"base": seed}
    manifest.config = {
        "strategy": args.strategy, "runs": args.runs, "iterations": args.iterations,
        "seed_size": args.seed_size, "batch": args.batch, "merge": args.merge,
        "holdout": args.holdout, "classifier": spec.to_dict(),
        "synthetic": None if args.corpus else args.synthetic,
    }
    manifest.resolved_argv = (
        ["simulate", "--strategy", args.strategy, "--runs", str(args.runs),
         "--iterations", str(args.iterations), "--seed-size", str(args.seed_size),
         "--batch", str(args.batch), "--merge", args.merge, "--holdout", str(args.holdout),
         "--classifier", args.classifier, "--features", args.features,
         "--epochs", str(args.epochs), "--lr", str(args.lr), "--l2", str(args.l2),
         "--nb-alpha", str(args.nb_alpha), "--seed", str(seed), "--out", str(out_dir)]
        + (["--corpus", str(args.corpus), "--gold", str(args.gold)] if args.corpus
           else ["--synthetic", str(args.synthetic)])
    )
    manifest.write(out_dir / "manifest.json")
    print(f"wrote {curve_count} learning curves to {out_dir}")
    return 0


def cmd_evaluate(args) -> int:
    manifest = RunManifest("evaluate", args._argv)
    manifest.add_input(args.pred)
    manifest.add_input(args.gold)
    pred = _final_labels(load_labels(args.pred))
    gold = _final_labels(load_labels(args.gold))
    shared = sorted(set(pred) & set(gold))
    if not shared:
        print("no overlapping doc ids between pred and gold", file=sys.stderr)
        return 2
    metrics = compute_metrics(
        [pred[d] for d in shared], [gold[d] for d in shared], positive=args.positive
    )
    out = Path(args.out)
    out.write_text(json.dumps(metrics.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    csv_path = Path(str(args.out) + ".csv")
    c = metrics.confusion
    csv_path.write_text(
        "precision,recall,f1,tp,fp,fn,tn\n"
        f"{metrics.precision:.6f},{metrics.recall:.6f},{metrics.f1:.6f},"
        f"{c['tp']},{c['fp']},{c['fn']},{c['tn']}\n",
        encoding="utf-8",
    )
    manifest.add_output(out)
    manifest.add_output(csv_path)
    manifest.config = {"positive": args.positive, "n": len(shared)}
    manifest.resolved_argv = [
        "evaluate", "--pred", str(args.pred), "--gold", str(args.gold),
        "--positive", args.positive, "--out", str(args.out),
    ]
    manifest.write(Path(str(args.out) + ".manifest.json"))
    print(f"precision={metrics.precision:.4f} recall={metrics.recall:.4f} f1={metrics.f1:.4f}")
    return 0


def cmd_explain(args) -> int:
    seed = _seed_from_env(args.seed)
    prep = _prep_from_args(args)
    manifest = RunManifest("explain", args._argv)
    manifest.add_input(args.corpus)
    manifest.add_input(args.labels)
    loaded = load_corpus(args.corpus)
    labels = _final_labels(load_labels(args.labels))
    tokenized = {doc.id: preprocess(doc, prep) for doc in loaded}
    training = [(tokenized[d], lbl) for d, lbl in labels.items() if d in tokenized]
    spec = _classifier_spec_from_args(args, seed)
    model = fit(spec, training)
    if args.doc_id not in tokenized:
        print(f"unknown doc id {args.doc_id}", file=sys.stderr)
        return 2
    config = ExplainConfig(rng_seed=seed)
    if args.method == "lime":
        explanation = explain_lime(model, tokenized[args.doc_id], args.target, config)
    else:
        explanation = explain_shap(model, tokenized[args.doc_id], args.target, config)
    out = Path(args.out)
    out.write_text(
        json.dumps(explanation.to_record(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )
    manifest.add_output(out)
    manifest.config = {"method": args.method, "doc_id": args.doc_id, "target": args.target}
    manifest.resolved_argv = (
        ["explain", "--corpus", str(args.corpus), "--labels", str(args.labels),
         "--doc-id", args.doc_id, "--method", args.method, "--target", args.target,
         "--classifier", args.classifier, "--features", args.features,
         "--epochs", str(args.epochs), "--lr", str(args.lr), "--l2", str(args.l2),
         "--nb-alpha", str(args.nb_alpha), "--seed", str(seed), "--out", str(args.out)]
        + (["--no-stem"] if args.no_stem else [])
        + (["--keep-stopwords"] if args.keep_stopwords else [])
        + ["--min-token-len", str(args.min_token_len)]
    )
    manifest.write(Path(str(args.out) + ".manifest.json"))
    print(f"wrote {args.method} explanation for {args.doc_id} -> {out}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import build_service

    seed = _seed_from_env(args.seed)
    corpora = {}
    for spec in args.corpus:
        name, _, path = spec.rpartition("=")
        path = Path(path)
        corpora[name or path.stem] = load_corpus(path)
    gold = _final_labels(load_labels(args.gold)) if args.gold else None
    app = build_service(
        corpora=corpora,
        data_dir=Path(args.data_dir),
        gold=gold,
        default_seed=seed,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


# ----------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="debtscope",
        description="Triage architecture-debt candidates in issue-tracker exports",
    )
    parser.add_argument("--version", action="version", version=f"debtscope {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="read an issue export into a corpus file")
    p.add_argument("--input", required=True)
    p.add_argument("--format", choices=["jira-json", "jsonl"], default="jsonl")
    p.add_argument("--out", required=True)
    p.add_argument("--ingest-time", default=None, help="pin the manifest timestamp (for replays)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("extract-keywords", help="extract ranked debt-indicative keywords")
    p.add_argument("--corpus", required=True)
    p.add_argument("--method", choices=["tfidf", "embedsim", "seeded"], default="tfidf")
    p.add_argument("--ngrams", default="1,2,3")
    p.add_argument("--top", type=int, default=15)
    p.add_argument("--blend", type=float, default=0.5)
    p.add_argument("--seeds", default=None, help="comma-separated seed keywords")
    p.add_argument("--labels", default=None, help="restrict to debt-labeled documents")
    p.add_argument("--include-weak", action="store_true")
    p.add_argument("--blacklist", default=None)
    p.add_argument("--dim", type=int, default=4096)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_prep_flags(p)
    p.set_defaults(func=cmd_extract_keywords)

    p = sub.add_parser("filter", help="match keywords against every corpus document")
    p.add_argument("--corpus", required=True)
    p.add_argument("--keywords", required=True)
    p.add_argument("--threshold", type=float, default=0.9)
    p.add_argument("--ngrams", default="1,2,3")
    p.add_argument("--dim", type=int, default=4096)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_prep_flags(p)
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("sample-size", help="finite-population sample size")
    p.add_argument("--population", type=int, required=True)
    p.add_argument("--confidence", type=float, default=0.95)
    p.add_argument("--margin", type=float, default=0.05)
    p.add_argument("--proportion", type=float, default=0.5)
    p.add_argument("--no-fpc", action="store_true", help="skip the finite-population correction")
    p.set_defaults(func=cmd_sample_size)

    p = sub.add_parser("adjudicate", help="resolve multi-annotator labels")
    p.add_argument("--labels", required=True)
    p.add_argument("--tiebreaker-annotator", default=None)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_adjudicate)

    p = sub.add_parser("simulate", help="simulated-oracle active learning runs")
    p.add_argument("--corpus", default=None)
    p.add_argument("--gold", default=None)
    p.add_argument("--synthetic", type=int, default=3000)
    p.add_argument("--strategy", default="breaking-ties")
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--iterations", type=int, default=10)
    p.add_argument("--seed-size", type=int, default=100)
    p.add_argument("--batch", type=int, default=100)
    p.add_argument("--holdout", type=float, default=0.2)
    p.add_argument("--merge", choices=["true-only", "true-plus-weak"], default="true-plus-weak")
    p.add_argument("--classifier", choices=["naive-bayes", "logistic"], default="logistic")
    p.add_argument("--features", choices=["tfidf-vector", "embedding"], default="tfidf-vector")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=2.0)
    p.add_argument("--l2", type=float, default=1.0)
    p.add_argument("--nb-alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="precision/recall/F1 of predictions vs gold")
    p.add_argument("--pred", required=True)
    p.add_argument("--gold", required=True)
    p.add_argument("--positive", default=LABEL_ATD)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("explain", help="explain one document's prediction")
    p.add_argument("--corpus", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--doc-id", required=True)
    p.add_argument("--method", choices=["lime", "shap"], default="lime")
    p.add_argument("--target", default=LABEL_ATD)
    p.add_argument("--classifier", choices=["naive-bayes", "logistic"], default="logistic")
    p.add_argument("--features", choices=["tfidf-vector", "embedding"], default="tfidf-vector")
    p.add_argument("--epochs", type=int, default=200)
    p.add_argument("--lr", type=float, default=2.0)
    p.add_argument("--l2", type=float, default=1.0)
    p.add_argument("--nb-alpha", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    _add_prep_flags(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("serve", help="run the annotation service")
    p.add_argument("--corpus", action="append", required=True,
                   help="corpus file, optionally name=path; repeatable")
    p.add_argument("--gold", default=None)
    p.add_argument("--data-dir", default="debtscope-data")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args._argv = list(argv) if argv is not None else sys.argv[1:]
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

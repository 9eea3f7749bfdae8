"""HTTP annotation service for live human-in-the-loop sessions.

Each session owns an active-learning loop where the oracle is the human
annotator: the service issues query batches, persists submitted labels to
an append-only event log *before* acknowledging them, retrains when a
batch completes, and serves explanations for the current model. Replaying
a session's event log (same seeds, same label order) reconstructs its
state exactly, so a restarted server resumes every session without
issuing conflicting batches.
"""

from __future__ import annotations

import json
import threading
import uuid
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel, Field

from . import classify
from .active import STRATEGIES, label_merge_config, select_batch, stratified_holdout
from .classify import ClassifierSpec, TrainingError
from .corpus import (
    LABEL_ATD,
    LABEL_NON_ATD,
    LABEL_WEAK_ATD,
    LABELS,
    Corpus,
    LabelRecord,
)
from .embed import HashedBowProvider
from .explain import ExplainConfig, explain_lime, explain_shap
from .stats import compute_metrics
from .textprep import PrepConfig, preprocess


class CreateSessionRequest(BaseModel):
    corpus_ref: str = "default"
    strategy: str = "breaking-ties"
    seed_size: int = Field(default=10, ge=1)
    batch_size: int = Field(default=10, ge=1)
    classifier: dict = Field(default_factory=dict)
    explain_config: dict = Field(default_factory=dict)
    rng_seed: Optional[int] = None
    merge_mode: str = "true-plus-weak"
    annotator: str = "annotator"


class LabelItem(BaseModel):
    doc_id: str
    label: str
    maybe_flag: bool = False


class SubmitLabelsRequest(BaseModel):
    labels: List[LabelItem]


def _effective_label(label: str, maybe_flag: bool) -> str:
    """Single-annotator resolution: Maybe|ATD -> WeakATD, Maybe|Non -> NonATD."""
    if maybe_flag and label == LABEL_ATD:
        return LABEL_WEAK_ATD
    return label


class Session:
    def __init__(
        self,
        session_id: str,
        corpus_name: str,
        corpus: Corpus,
        config: CreateSessionRequest,
        gold: Optional[Dict[str, str]],
        log_path: Path,
        prep: PrepConfig,
    ):
        self.id = session_id
        self.corpus_name = corpus_name
        self.corpus = corpus
        self.config = config
        self.log_path = log_path
        self.lock = threading.Lock()
        self.prep = prep
        self.tokenized = {doc.id: preprocess(doc, prep) for doc in corpus}
        self.provider = HashedBowProvider(dimension=4096, seed=config.rng_seed or 0, prep=prep)
        self.merge = label_merge_config(config.merge_mode)
        self.classifier_spec = ClassifierSpec.from_dict(config.classifier) if config.classifier else ClassifierSpec(
            kind="logistic", epochs=200, lr=2.0
        )
        self.rng = np.random.Generator(np.random.PCG64(config.rng_seed or 0))

        all_ids = [doc.id for doc in corpus]
        self.gold = gold if gold and all(d in gold for d in all_ids) else None
        if self.gold:
            self.holdout_ids, pool_ids = stratified_holdout(all_ids, self.gold, 0.2, self.rng)
        else:
            self.holdout_ids, pool_ids = [], list(all_ids)
        if config.seed_size > len(pool_ids):
            raise ValueError("seed_size exceeds pool size")

        self.pool: List[str] = pool_ids
        self.labeled: List[LabelRecord] = []
        self.pending: Dict[str, LabelItem] = {}
        self.model = None
        self.model_version = 0
        self.iteration = 0
        self.curve: List[dict] = []
        self.explanations: Dict[tuple, dict] = {}
        self.status = "seeding"
        self.note = ""

        picks = self.rng.choice(len(self.pool), size=config.seed_size, replace=False)
        chosen = {self.pool[int(i)] for i in picks}
        self.awaiting: List[str] = [d for d in self.pool if d in chosen]
        self.issued = False

    # -------------------------------------------------------------- state

    def snapshot(self) -> dict:
        return {
            "session_id": self.id,
            "corpus": self.corpus_name,
            "status": self.status,
            "strategy": self.config.strategy,
            "iteration": self.iteration,
            "model_version": self.model_version,
            "labeled_count": len(self.labeled),
            "pool_count": len(self.pool),
            "awaiting": list(self.awaiting),
            "pending": sorted(self.pending),
            "issued": self.issued,
            "note": self.note,
        }

    def _doc_payload(self, doc_id: str) -> dict:
        doc = self.corpus.by_id(doc_id)
        tdoc = self.tokenized[doc_id]
        payload = {
            "id": doc.id,
            "summary": doc.summary,
            "description": doc.description,
            "text": doc.unified_text,
            "tokens": list(tdoc.tokens),
            "spans": [list(span) for span in tdoc.raw_spans],
        }
        if self.model is not None:
            payload["predicted_probs"] = classify.predict_proba(self.model, tdoc).as_dict()
        return payload

    def next_batch(self) -> dict:
        if self.status == "done":
            raise HTTPException(status_code=410, detail="pool exhausted; session done")
        if self.issued:
            raise HTTPException(status_code=409, detail="previous batch still awaiting labels")
        self.issued = True
        return {
            "docs": [self._doc_payload(d) for d in self.awaiting],
            "iteration": self.iteration,
        }

    def pending_incomplete(self) -> bool:
        return bool(set(self.awaiting) - set(self.pending))

    # ------------------------------------------------------------- labels

    def _append_event(self, event: dict) -> None:
        with self.log_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, ensure_ascii=False, separators=(",", ":")) + "\n")
            fh.flush()

    def submit_labels(self, items: List[LabelItem], persist: bool = True) -> dict:
        awaiting = set(self.awaiting)
        for item in items:
            if item.doc_id not in awaiting:
                raise HTTPException(
                    status_code=422, detail=f"doc {item.doc_id!r} is not in the issued batch"
                )
            if item.label not in LABELS:
                raise HTTPException(
                    status_code=422,
                    detail=f"unknown label {item.label!r}; valid: {', '.join(LABELS)}",
                )
            if item.maybe_flag and item.label not in (LABEL_ATD, LABEL_NON_ATD):
                raise HTTPException(
                    status_code=422, detail="maybe_flag is only valid on ATD / NonATD"
                )
        if persist:
            # durability before acknowledgement
            self._append_event(
                {
                    "event": "labels",
                    "items": [item.model_dump() for item in items],
                }
            )
        for item in items:
            self.pending[item.doc_id] = item
        response = {"accepted": len(items), "retrained": False}
        if not self.pending_incomplete():
            response.update(self._complete_batch())
        return response

    def _training_pairs(self):
        pairs = []
        for rec in self.labeled:
            effective = _effective_label(rec.label, rec.maybe_flag)
            pairs.append((self.tokenized[rec.doc_id], self.merge[effective]))
        return pairs

    def _complete_batch(self) -> dict:
        batch_ids = list(self.awaiting)
        for doc_id in batch_ids:
            item = self.pending[doc_id]
            self.labeled.append(
                LabelRecord(
                    doc_id=doc_id,
                    annotator=self.config.annotator,
                    label=item.label,
                    maybe_flag=item.maybe_flag,
                )
            )
        batch_set = set(batch_ids)
        self.pool = [d for d in self.pool if d not in batch_set]
        self.pending.clear()
        self.awaiting = []
        self.issued = False

        result: dict = {"retrained": False}
        self.status = "training"
        try:
            self.model = classify.fit(self.classifier_spec, self._training_pairs(), provider=self.provider)
            self.model_version += 1
            result["retrained"] = True
            self.note = ""
        except TrainingError as exc:
            self.model = None
            self.note = f"training skipped: {exc}"
            result["note"] = self.note
        self.iteration += 1

        if result["retrained"] and self.gold and self.holdout_ids:
            predicted = [
                classify.predict_proba(self.model, self.tokenized[d]).argmax_label()
                for d in self.holdout_ids
            ]
            gold_merged = [self.merge[self.gold[d]] for d in self.holdout_ids]
            metrics = compute_metrics(predicted, gold_merged, LABEL_ATD)
            row = {
                "iteration": self.iteration,
                "labeled_count": len(self.labeled),
                "precision": metrics.precision,
                "recall": metrics.recall,
                "f1": metrics.f1,
            }
            self.curve.append(row)
            result["metrics"] = {
                "precision": metrics.precision,
                "recall": metrics.recall,
                "f1": metrics.f1,
            }
        else:
            self.curve.append(
                {
                    "iteration": self.iteration,
                    "labeled_count": len(self.labeled),
                    "precision": None,
                    "recall": None,
                    "f1": None,
                }
            )

        if not self.pool:
            self.status = "done"
            return result

        if self.model is not None and self.config.strategy not in ("random", "embedding-kmeans"):
            batch = select_batch(
                self.config.strategy,
                self.model,
                [self.tokenized[d] for d in self.pool],
                [self.tokenized[rec.doc_id] for rec in self.labeled],
                self.provider,
                self.config.batch_size,
                self.rng,
            )
        else:
            strategy = self.config.strategy if self.model is not None else "random"
            if strategy not in ("random", "embedding-kmeans"):
                strategy = "random"
            batch = select_batch(
                strategy,
                None,
                [self.tokenized[d] for d in self.pool],
                [],
                self.provider,
                self.config.batch_size,
                self.rng,
            )
        batch_set = set(batch)
        self.awaiting = [d for d in self.pool if d in batch_set]
        self.issued = False
        self.status = "querying"
        return result

    # -------------------------------------------------------- explanations

    def explanation(self, doc_id: str, method: str, target: Optional[str]) -> dict:
        if self.model is None or self.model_version < 1:
            raise HTTPException(status_code=409, detail="no trained model yet")
        if method not in ("lime", "shap"):
            raise HTTPException(status_code=400, detail=f"unknown method {method!r}; valid: lime, shap")
        if doc_id not in self.tokenized:
            raise HTTPException(status_code=404, detail=f"unknown document {doc_id!r}")
        tdoc = self.tokenized[doc_id]
        if not tdoc.tokens:
            raise HTTPException(status_code=422, detail="document has no tokens to explain")
        resolved_target = target or classify.predict_proba(self.model, tdoc).argmax_label()
        key = (self.model_version, doc_id, method, resolved_target)
        if key not in self.explanations:
            config = ExplainConfig(
                rng_seed=self.config.rng_seed or 0,
                **(self.config.explain_config or {}),
            )
            if method == "lime":
                exp = explain_lime(self.model, tdoc, resolved_target, config)
            else:
                exp = explain_shap(self.model, tdoc, resolved_target, config)
            record = exp.to_record()
            record["target"] = resolved_target
            record["model_version"] = self.model_version
            record["tokens"] = list(tdoc.tokens)
            record["spans"] = [list(span) for span in tdoc.raw_spans]
            self.explanations[key] = record
        return self.explanations[key]

    def learning_curve_csv(self) -> str:
        lines = ["iteration,labeled_count,precision,recall,f1"]
        for row in self.curve:
            cells = [str(row["iteration"]), str(row["labeled_count"])]
            for key in ("precision", "recall", "f1"):
                value = row[key]
                cells.append("" if value is None else f"{value:.6f}")
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def _replay_session(
    session_id: str,
    log_path: Path,
    corpora: Dict[str, Corpus],
    gold: Optional[Dict[str, str]],
    prep: PrepConfig,
) -> Optional[Session]:
    events = []
    for line in log_path.read_text("utf-8").splitlines():
        if line.strip():
            events.append(json.loads(line))
    if not events or events[0].get("event") != "created":
        return None
    created = events[0]
    config = CreateSessionRequest(**created["config"])
    corpus_name = config.corpus_ref
    if corpus_name not in corpora:
        return None
    session = Session(
        session_id, corpus_name, corpora[corpus_name], config, gold, log_path, prep
    )
    for event in events[1:]:
        if event.get("event") != "labels":
            continue
        items = [LabelItem(**item) for item in event["items"]]
        # issuance is not persisted; replay implies the batch was issued
        session.issued = True
        session.submit_labels(items, persist=False)
    return session


def build_service(
    corpora: Dict[str, Corpus],
    data_dir: Path,
    gold: Optional[Dict[str, str]] = None,
    default_seed: int = 0,
    prep: Optional[PrepConfig] = None,
) -> FastAPI:
    prep = prep or PrepConfig()
    data_dir = Path(data_dir)
    sessions_dir = data_dir / "sessions"
    sessions_dir.mkdir(parents=True, exist_ok=True)

    app = FastAPI(title="debtscope annotation service", version="1")
    sessions: Dict[str, Session] = {}

    for log_path in sorted(sessions_dir.glob("*.jsonl")):
        try:
            session = _replay_session(log_path.stem, log_path, corpora, gold, prep)
        except (ValueError, KeyError, json.JSONDecodeError, HTTPException):
            continue  # corrupt or incompatible log; leave the file for inspection
        if session is not None:
            sessions[session.id] = session

    def get_session(session_id: str) -> Session:
        session = sessions.get(session_id)
        if session is None:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id!r}")
        return session

    @app.post("/v1/sessions", status_code=201)
    def create_session(request: CreateSessionRequest):
        if request.corpus_ref not in corpora:
            raise HTTPException(
                status_code=404,
                detail=f"unknown corpus {request.corpus_ref!r}; loaded: {sorted(corpora)}",
            )
        if request.strategy not in STRATEGIES:
            raise HTTPException(
                status_code=400,
                detail=f"unknown strategy {request.strategy!r}; valid: {', '.join(STRATEGIES)}",
            )
        if request.merge_mode not in ("true-only", "true-plus-weak"):
            raise HTTPException(status_code=400, detail="merge_mode must be true-only or true-plus-weak")
        if request.explain_config:
            try:
                ExplainConfig(rng_seed=0, **request.explain_config)
            except (TypeError, ValueError) as exc:
                raise HTTPException(status_code=400, detail=f"bad explain_config: {exc}") from exc
        if request.classifier:
            try:
                ClassifierSpec.from_dict(request.classifier)
            except (TypeError, ValueError) as exc:
                raise HTTPException(status_code=400, detail=f"bad classifier config: {exc}") from exc
        if request.rng_seed is None:
            request.rng_seed = default_seed
        session_id = uuid.uuid4().hex[:12]
        log_path = sessions_dir / f"{session_id}.jsonl"
        try:
            session = Session(
                session_id, request.corpus_ref, corpora[request.corpus_ref],
                request, gold, log_path, prep,
            )
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc
        session._append_event(
            {"event": "created", "session_id": session_id, "config": request.model_dump()}
        )
        sessions[session_id] = session
        return {"session_id": session_id}

    @app.get("/v1/sessions/{session_id}")
    def session_snapshot(session_id: str):
        return get_session(session_id).snapshot()

    @app.get("/v1/sessions/{session_id}/next-batch")
    def next_batch(session_id: str):
        session = get_session(session_id)
        if not session.lock.acquire(blocking=False):
            raise HTTPException(status_code=409, detail="training")
        try:
            return session.next_batch()
        finally:
            session.lock.release()

    @app.post("/v1/sessions/{session_id}/labels")
    def submit_labels(session_id: str, request: SubmitLabelsRequest):
        session = get_session(session_id)
        with session.lock:
            if not session.issued:
                raise HTTPException(status_code=409, detail="no batch issued")
            return session.submit_labels(request.labels)

    @app.get("/v1/sessions/{session_id}/learning-curve", response_class=PlainTextResponse)
    def learning_curve(session_id: str):
        return get_session(session_id).learning_curve_csv()

    @app.get("/v1/documents/{doc_id}/explanation")
    def explanation(doc_id: str, session: str, method: str = "lime", target: Optional[str] = None):
        sess = get_session(session)
        with sess.lock:
            return sess.explanation(doc_id, method, target)

    @app.get("/v1/meta")
    def meta():
        return {
            "corpora": {name: len(c) for name, c in corpora.items()},
            "strategies": list(STRATEGIES),
            "sessions": sorted(sessions),
        }

    return app

"""Corpus ingestion and persistence for issue-tracker exports.

Two input formats are supported: raw Jira JSON exports (the `issues` array
as returned by Jira's search API) and a plain JSONL format with one issue
per line. Ingest keeps resolved issues only and builds the unified
summary+description text per document. The canonical on-disk corpus format
is JSONL with a single header line carrying the manifest, so a corpus
re-saves byte-identically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Iterable, List, Optional, Union

FORMAT_NAME = "debtscope-corpus"
FORMAT_VERSION = 1

STATUS_RESOLVED = "resolved"
STATUS_UNRESOLVED = "unresolved"

LABEL_ATD = "ATD"
LABEL_WEAK_ATD = "WeakATD"
LABEL_NON_ATD = "NonATD"
LABELS = (LABEL_ATD, LABEL_WEAK_ATD, LABEL_NON_ATD)


class IngestError(ValueError):
    """Unrecoverable ingest failure (duplicate id, unparsable source)."""


class CorpusFormatError(ValueError):
    """Corpus file is corrupted or has an unsupported version."""


def unify_text(summary: str, description: str) -> str:
    """Summary and description joined into one whitespace-normalized text."""
    return " ".join(f"{summary} {description}".split())


@dataclass
class Document:
    id: str
    project: str
    summary: str
    description: str
    unified_text: str
    status: str
    created_at: Optional[str] = None

    @classmethod
    def build(
        cls,
        id: str,
        project: str,
        summary: str,
        description: str,
        status: str,
        created_at: Optional[str] = None,
    ) -> "Document":
        return cls(
            id=id,
            project=project,
            summary=summary,
            description=description,
            unified_text=unify_text(summary, description),
            status=status,
            created_at=created_at,
        )

    def to_record(self) -> dict:
        # fixed key order for byte-identical re-saves
        return {
            "id": self.id,
            "project": self.project,
            "summary": self.summary,
            "description": self.description,
            "unified_text": self.unified_text,
            "status": self.status,
            "created_at": self.created_at,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Document":
        return cls(
            id=rec["id"],
            project=rec.get("project", ""),
            summary=rec.get("summary", ""),
            description=rec.get("description", ""),
            unified_text=rec["unified_text"],
            status=rec["status"],
            created_at=rec.get("created_at"),
        )


@dataclass
class Corpus:
    documents: List[Document] = field(default_factory=list)
    manifest: dict = field(default_factory=dict)

    def __iter__(self):
        return iter(self.documents)

    def __len__(self):
        return len(self.documents)

    def by_id(self, doc_id: str) -> Document:
        for doc in self.documents:
            if doc.id == doc_id:
                return doc
        raise KeyError(doc_id)


@dataclass
class LabelRecord:
    doc_id: str
    annotator: str
    label: str
    maybe_flag: bool = False
    final: Optional[str] = None

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"unknown label {self.label!r}")
        if self.maybe_flag and self.label not in (LABEL_ATD, LABEL_NON_ATD):
            raise ValueError("maybe_flag is only valid on ATD / NonATD labels")
        if self.final is not None and self.final not in LABELS:
            raise ValueError(f"unknown final label {self.final!r}")

    def to_record(self) -> dict:
        return {
            "doc_id": self.doc_id,
            "annotator": self.annotator,
            "label": self.label,
            "maybe_flag": self.maybe_flag,
            "final": self.final,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "LabelRecord":
        return cls(
            doc_id=rec["doc_id"],
            annotator=rec["annotator"],
            label=rec["label"],
            maybe_flag=bool(rec.get("maybe_flag", False)),
            final=rec.get("final"),
        )


def _jira_issue_to_document(issue: dict) -> Document:
    key = issue.get("key")
    if not key:
        raise KeyError("key")
    fields = issue.get("fields", {})
    if "summary" not in fields or fields["summary"] is None:
        raise KeyError("fields.summary")
    summary = str(fields["summary"])
    description = fields.get("description") or ""
    resolution = fields.get("resolution")
    status = STATUS_RESOLVED if resolution is not None else STATUS_UNRESOLVED
    project = ""
    proj_field = fields.get("project")
    if isinstance(proj_field, dict):
        project = proj_field.get("key", "")
    if not project:
        project = key.split("-")[0] if "-" in key else ""
    return Document.build(
        id=key,
        project=project,
        summary=summary,
        description=str(description),
        status=status,
        created_at=fields.get("created"),
    )


def _plain_record_to_document(rec: dict) -> Document:
    if "id" not in rec or not rec["id"]:
        raise KeyError("id")
    if "summary" not in rec or rec["summary"] is None:
        raise KeyError("summary")
    doc_id = str(rec["id"])
    status = rec.get("status", STATUS_RESOLVED)
    if status not in (STATUS_RESOLVED, STATUS_UNRESOLVED):
        raise ValueError(f"bad status {status!r}")
    project = rec.get("project") or (doc_id.split("-")[0] if "-" in doc_id else "")
    return Document.build(
        id=doc_id,
        project=project,
        summary=str(rec["summary"]),
        description=str(rec.get("description") or ""),
        status=status,
        created_at=rec.get("created_at"),
    )


def _iter_source_records(source, fmt: str):
    """Yield (position, raw-record-or-error) pairs from the source."""
    if fmt == "jira-json":
        if hasattr(source, "read"):
            data = json.load(source)
        else:
            data = json.loads(Path(source).read_text("utf-8"))
        issues = data.get("issues") if isinstance(data, dict) else data
        if not isinstance(issues, list):
            raise IngestError("jira-json source has no issues array")
        for i, issue in enumerate(issues):
            yield i + 1, issue
    elif fmt == "jsonl":
        if hasattr(source, "read"):
            lines = source.read().splitlines()
        else:
            lines = Path(source).read_text("utf-8").splitlines()
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            yield i + 1, line
    else:
        raise IngestError(f"unknown ingest format {fmt!r}")


def ingest(
    source: Union[str, Path, IO],
    format: str = "jsonl",
    source_path: Optional[str] = None,
    ingest_time: Optional[str] = None,
) -> Corpus:
    """Parse an issue export, keeping resolved issues in source order.

    Malformed records are skipped and counted; a duplicate document id
    aborts the whole ingest.
    """
    records = list(_iter_source_records(source, format))

    documents: List[Document] = []
    seen_ids = set()
    rejected_lines: List[int] = []
    unresolved = 0
    for pos, raw in records:
        try:
            if format == "jsonl":
                rec = json.loads(raw)
                if not isinstance(rec, dict):
                    raise ValueError("record is not an object")
                doc = _plain_record_to_document(rec)
            else:
                if not isinstance(raw, dict):
                    raise ValueError("record is not an object")
                doc = _jira_issue_to_document(raw)
        except (KeyError, ValueError, TypeError):
            rejected_lines.append(pos)
            continue
        if doc.id in seen_ids:
            raise IngestError(f"duplicate document id {doc.id!r} at record {pos}")
        seen_ids.add(doc.id)
        if doc.status != STATUS_RESOLVED:
            unresolved += 1
            continue
        documents.append(doc)

    manifest = {
        "source_path": source_path or (str(source) if not hasattr(source, "read") else ""),
        "ingest_time": ingest_time or "",
        "counts": {
            "resolved": len(documents),
            "unresolved": unresolved,
            "rejected": len(rejected_lines),
        },
        "rejected_lines": rejected_lines[:100],
    }
    return Corpus(documents=documents, manifest=manifest)


def save_corpus(corpus: Corpus, path: Union[str, Path]) -> None:
    path = Path(path)
    header = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "manifest": corpus.manifest,
    }
    lines = [json.dumps(header, ensure_ascii=False, separators=(",", ":"))]
    for doc in corpus.documents:
        lines.append(json.dumps(doc.to_record(), ensure_ascii=False, separators=(",", ":")))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_corpus(path: Union[str, Path]) -> Corpus:
    path = Path(path)
    try:
        text = path.read_text("utf-8")
    except OSError as exc:
        raise CorpusFormatError(f"cannot read corpus at {path}: {exc}") from exc
    lines = text.splitlines()
    if not lines:
        raise CorpusFormatError(f"{path}: empty corpus file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise CorpusFormatError(f"{path}: bad header line: {exc}") from exc
    if not isinstance(header, dict) or header.get("format") != FORMAT_NAME:
        raise CorpusFormatError(f"{path}: not a {FORMAT_NAME} file")
    if header.get("version") != FORMAT_VERSION:
        raise CorpusFormatError(
            f"{path}: unsupported corpus version {header.get('version')!r}"
        )
    documents = []
    seen = set()
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            doc = Document.from_record(rec)
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise CorpusFormatError(f"{path}:{i}: corrupted record: {exc}") from exc
        if doc.id in seen:
            raise CorpusFormatError(f"{path}:{i}: duplicate document id {doc.id!r}")
        seen.add(doc.id)
        documents.append(doc)
    return Corpus(documents=documents, manifest=header.get("manifest", {}))


def save_labels(records: Iterable[LabelRecord], path: Union[str, Path]) -> None:
    path = Path(path)
    lines = [
        json.dumps(rec.to_record(), ensure_ascii=False, separators=(",", ":"))
        for rec in records
    ]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def load_labels(path: Union[str, Path]) -> List[LabelRecord]:
    path = Path(path)
    records = []
    for i, line in enumerate(path.read_text("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            records.append(LabelRecord.from_record(json.loads(line)))
        except (json.JSONDecodeError, KeyError, ValueError) as exc:
            raise CorpusFormatError(f"{path}:{i}: bad label record: {exc}") from exc
    return records

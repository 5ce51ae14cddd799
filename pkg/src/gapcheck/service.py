"""HTTP backend for the human annotation workflow.

Serves unlabeled records one at a time (with precomputed screening signals,
coverage, and citation highlight spans), persists expert labels and
explanations, tracks progress with a live balance readout, and exports the
annotations file the rest of the pipeline consumes.

Persistence is an append-only JSONL event log: every submission is one line,
a resubmission for the same record appends a superseding line, and replaying
the log reconstructs the current state exactly. No database; 20-40 example
workloads want auditability, not throughput.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import PlainTextResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from gapcheck import citescreen, corpus
from gapcheck.taxonomy import GapLabelSet, LabelError, parse_label_list


@dataclass(frozen=True)
class StoredAnnotation:
    record_id: str
    labels: GapLabelSet
    explanation: str
    annotator_id: str
    annotated_at: str

    def to_example(self) -> corpus.AnnotatedExample:
        return corpus.AnnotatedExample(
            record_id=self.record_id,
            gold=self.labels,
            explanation=self.explanation,
            annotator_id=self.annotator_id,
            annotated_at=self.annotated_at,
        )


class AnnotationStore:
    """Append-only JSONL log with superseding semantics.

    The latest event per (annotator_id, record_id) under the current records
    digest wins; earlier events remain in the log as the audit trail. Writes
    are serialized by a lock so concurrent submissions never interleave.
    """

    def __init__(self, log_path: str | Path, records_digest: str):
        self.log_path = Path(log_path)
        self.records_digest = records_digest
        self._lock = threading.Lock()
        self._state: dict[tuple[str, str], StoredAnnotation] = {}
        self._replay()

    def _replay(self) -> None:
        if not self.log_path.exists():
            return
        with open(self.log_path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                event = json.loads(line)
                if event.get("records_digest") != self.records_digest:
                    continue
                ann = StoredAnnotation(
                    record_id=event["record_id"],
                    labels=parse_label_list(event["label"]),
                    explanation=event["explanation"],
                    annotator_id=event["annotator_id"],
                    annotated_at=event["annotated_at"],
                )
                self._state[(ann.annotator_id, ann.record_id)] = ann

    def submit(self, ann: StoredAnnotation) -> bool:
        """Persist an annotation; returns True when it supersedes an earlier one."""
        event = {
            "records_digest": self.records_digest,
            "record_id": ann.record_id,
            "label": ann.labels.to_list(),
            "explanation": ann.explanation,
            "annotator_id": ann.annotator_id,
            "annotated_at": ann.annotated_at,
        }
        with self._lock:
            superseded = (ann.annotator_id, ann.record_id) in self._state
            self.log_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.log_path, "a", encoding="utf-8", newline="\n") as fh:
                fh.write(json.dumps(event, ensure_ascii=False) + "\n")
                fh.flush()
                os.fsync(fh.fileno())
            self._state[(ann.annotator_id, ann.record_id)] = ann
        return superseded

    def annotations(self, annotator_id: str | None = None) -> list[StoredAnnotation]:
        with self._lock:
            values = list(self._state.values())
        if annotator_id is not None:
            values = [a for a in values if a.annotator_id == annotator_id]
        return values

    def labeled_ids(self, annotator_id: str) -> set[str]:
        with self._lock:
            return {rid for (aid, rid) in self._state if aid == annotator_id}


def _records_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class SubmitPayload(BaseModel):
    annotator_id: str
    record_id: str
    label: list[int]
    explanation: str = ""


def _citation_dicts(text: str) -> list[dict]:
    return [c.to_dict() for c in citescreen.extract_citations(text)]


def create_app(
    records_path: str | Path,
    data_dir: str | Path,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    records = corpus.load_records(records_path)
    digest = _records_digest(records_path)
    order = {r.record_id: i for i, r in enumerate(records)}
    by_id = {r.record_id: r for r in records}
    store = AnnotationStore(Path(data_dir) / "annotations.log.jsonl", digest)

    app = FastAPI(title="gapcheck annotation service")
    app.state.store = store
    app.state.records = records

    def session_view(annotator_id: str) -> dict:
        labeled = store.labeled_ids(annotator_id)
        cursor = next(
            (i for i, r in enumerate(records) if r.record_id not in labeled), None
        )
        return {
            "session_id": f"{annotator_id}:{digest[:12]}",
            "annotator_id": annotator_id,
            "records_digest": digest,
            "total": len(records),
            "completed": len(labeled),
            "cursor": cursor,
        }

    @app.get("/api/session")
    def get_session(annotator_id: str = Query(...)) -> dict:
        return session_view(annotator_id)

    @app.get("/api/next")
    def get_next(annotator_id: str = Query(...)) -> dict:
        labeled = store.labeled_ids(annotator_id)
        for index, record in enumerate(records):
            if record.record_id in labeled:
                continue
            return {
                "index": index,
                "total": len(records),
                "record": record.to_dict(),
                "signals": citescreen.screen(record).to_dict(),
                "coverage": citescreen.coverage(record).to_dict(),
                "citations": {
                    "generation": _citation_dicts(record.generation),
                    "target": _citation_dicts(record.target),
                    "previous_text": _citation_dicts(record.previous_text),
                },
            }
        raise HTTPException(status_code=404, detail="exhausted")

    @app.post("/api/annotations")
    def post_annotation(payload: SubmitPayload) -> dict:
        record = by_id.get(payload.record_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown record {payload.record_id!r}")
        try:
            labels = parse_label_list(payload.label)
        except LabelError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        if labels.has_gap and not payload.explanation.strip():
            raise HTTPException(
                status_code=422,
                detail="an explanation is required when any gap label is present",
            )
        ann = StoredAnnotation(
            record_id=payload.record_id,
            labels=labels,
            explanation=payload.explanation,
            annotator_id=payload.annotator_id,
            annotated_at=datetime.now(timezone.utc).isoformat(),
        )
        superseded = store.submit(ann)
        return {"annotation": ann.to_example().to_dict(), "superseded": superseded}

    @app.get("/api/progress")
    def get_progress(annotator_id: str = Query(...)) -> dict:
        anns = store.annotations(annotator_id)
        counts = {k: 0 for k in range(corpus.N_CATEGORIES)}
        for ann in anns:
            for label in ann.labels:
                counts[label] += 1
        total_instances = sum(counts.values())
        distribution = (
            {str(k): counts[k] / total_instances for k in counts}
            if total_instances
            else None
        )
        balance = (
            corpus.entropy_balance(counts[k] / total_instances for k in counts)
            if total_instances
            else None
        )
        return {
            "completed": len(anns),
            "total": len(records),
            "label_counts": {str(k): v for k, v in counts.items()},
            "label_distribution": distribution,
            "balance": balance,
        }

    def export_lines(annotator_id: str | None) -> str:
        anns = store.annotations(annotator_id)
        if not anns:
            raise HTTPException(status_code=404, detail="empty store")
        anns.sort(key=lambda a: (a.annotator_id, order.get(a.record_id, len(order))))
        return corpus.write_annotations(a.to_example() for a in anns)

    @app.get("/api/export")
    def get_export(annotator_id: str | None = Query(default=None)) -> PlainTextResponse:
        return PlainTextResponse(
            export_lines(annotator_id), media_type="application/x-ndjson"
        )

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def main(argv: Iterable[str] | None = None) -> None:
    parser = argparse.ArgumentParser(
        prog="gapcheck-annotate",
        description="Serve the annotation workflow over HTTP.",
    )
    parser.add_argument("--records", required=True, help="records JSONL to annotate")
    parser.add_argument("--data-dir", required=True, help="directory for the annotation log")
    parser.add_argument("--ui-dir", help="built UI bundle to serve at /")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8400)
    args = parser.parse_args(list(argv) if argv is not None else None)

    import uvicorn

    app = create_app(args.records, args.data_dir, args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port)


if __name__ == "__main__":
    main()

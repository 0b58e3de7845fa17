"""HTTP service for the pairwise-annotation workflow.

Serves randomized comparison pairs (insight text + chart image per side),
records overall preferences append-only with conflict rejection, and
exposes tallies, consensus, and lossless export/import.  Pair payloads
carry no judge information whatsoever: scores and judger rankings stay
server-side until analysis.
"""

from __future__ import annotations

import json
import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse, JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .model import (
    AnnotationError,
    AnnotationSequence,
    DuplicateAnswerError,
    PreferenceRecord,
    WinTally,
    consensus,
    tally_wins,
)


class AnnotationStore:
    """Sequences + append-only preference records with file persistence."""

    def __init__(self, root: str | Path | None = None):
        self.root = Path(root) if root else None
        self._sequences: dict[str, AnnotationSequence] = {}
        self._payloads: dict[str, dict[str, dict]] = {}  # seq -> report -> payload
        self._records: dict[str, list[PreferenceRecord]] = {}
        self._lock = threading.Lock()
        if self.root is not None:
            self._load()

    # -- persistence --------------------------------------------------------

    def _seq_dir(self) -> Path:
        assert self.root is not None
        return self.root / "sequences"

    def _records_path(self, sequence_id: str) -> Path:
        assert self.root is not None
        return self.root / "records" / f"{sequence_id}.jsonl"

    def _load(self) -> None:
        seq_dir = self._seq_dir()
        if seq_dir.exists():
            for path in sorted(seq_dir.glob("*.json")):
                doc = json.loads(path.read_text())
                seq = AnnotationSequence.from_dict(doc["sequence"])
                self._sequences[seq.sequence_id] = seq
                self._payloads[seq.sequence_id] = doc.get("payloads", {})
                self._records[seq.sequence_id] = []
                rec_path = self._records_path(seq.sequence_id)
                if rec_path.exists():
                    with open(rec_path) as fh:
                        for line in fh:
                            if line.strip():
                                self._records[seq.sequence_id].append(
                                    PreferenceRecord.from_dict(json.loads(line))
                                )

    def add_sequence(self, sequence: AnnotationSequence, payloads: dict[str, dict]) -> None:
        with self._lock:
            if sequence.sequence_id in self._sequences:
                raise AnnotationError(f"sequence {sequence.sequence_id} already present")
            self._sequences[sequence.sequence_id] = sequence
            self._payloads[sequence.sequence_id] = payloads
            self._records[sequence.sequence_id] = []
            if self.root is not None:
                self._seq_dir().mkdir(parents=True, exist_ok=True)
                (self._seq_dir() / f"{sequence.sequence_id}.json").write_text(
                    json.dumps({"sequence": sequence.to_dict(), "payloads": payloads},
                               indent=2, sort_keys=True) + "\n"
                )

    # -- queries --------------------------------------------------------------

    def sequences(self) -> list[AnnotationSequence]:
        with self._lock:
            return list(self._sequences.values())

    def sequence(self, sequence_id: str) -> AnnotationSequence:
        with self._lock:
            if sequence_id not in self._sequences:
                raise KeyError(sequence_id)
            return self._sequences[sequence_id]

    def payload(self, sequence_id: str, report_id: str) -> dict:
        with self._lock:
            return self._payloads[sequence_id].get(report_id, {})

    def records(self, sequence_id: str) -> list[PreferenceRecord]:
        with self._lock:
            return list(self._records.get(sequence_id, []))

    def answered(self, sequence_id: str, annotator_id: str) -> set[str]:
        return {r.pair_id for r in self.records(sequence_id) if r.annotator_id == annotator_id}

    # -- mutation ---------------------------------------------------------------

    def add_record(self, sequence_id: str, record: PreferenceRecord) -> None:
        with self._lock:
            seq = self._sequences.get(sequence_id)
            if seq is None:
                raise KeyError(sequence_id)
            try:
                seq.pair(record.pair_id)
            except KeyError:
                raise KeyError(record.pair_id) from None
            for existing in self._records[sequence_id]:
                if existing.pair_id == record.pair_id and existing.annotator_id == record.annotator_id:
                    raise DuplicateAnswerError(
                        f"pair {record.pair_id} already answered by {record.annotator_id}"
                    )
            self._records[sequence_id].append(record)
            if self.root is not None:
                path = self._records_path(sequence_id)
                path.parent.mkdir(parents=True, exist_ok=True)
                with open(path, "a") as fh:
                    fh.write(json.dumps(record.to_dict(), sort_keys=True) + "\n")

    # -- analysis ---------------------------------------------------------------

    def tallies(self, sequence_id: str) -> list[WinTally]:
        seq = self.sequence(sequence_id)
        records = self.records(sequence_id)
        annotators = sorted({r.annotator_id for r in records})
        complete = []
        for annotator in annotators:
            answered = {r.pair_id for r in records if r.annotator_id == annotator}
            if answered >= {p.pair_id for p in seq.pairs}:
                complete.append(tally_wins(records, seq, annotator))
        return complete

    # -- export/import ------------------------------------------------------------

    def export_doc(self) -> dict:
        docs = []
        for seq in sorted(self.sequences(), key=lambda s: s.sequence_id):
            tallies = [t.to_dict() for t in self.tallies(seq.sequence_id)]
            docs.append(
                {
                    "sequence": seq.to_dict(),
                    "payloads": self._payloads[seq.sequence_id],
                    "records": [r.to_dict() for r in self.records(seq.sequence_id)],
                    "tallies": tallies,
                }
            )
        return {"sequences": docs}

    def import_doc(self, doc: dict) -> int:
        count = 0
        for entry in doc.get("sequences", []):
            seq = AnnotationSequence.from_dict(entry["sequence"])
            self.add_sequence(seq, entry.get("payloads", {}))
            for record_doc in entry.get("records", []):
                self.add_record(seq.sequence_id, PreferenceRecord.from_dict(record_doc))
            count += 1
        return count


def canonical_export_bytes(doc: dict) -> bytes:
    """Normalized export form: key-sorted, fixed separators (round-trip tests)."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()


class RecordIn(BaseModel):
    pair_id: str
    annotator_id: str
    choice: str
    rubric: dict[str, int] = Field(default_factory=dict)
    rationale: str = ""
    timestamp: float = 0.0


def create_app(store: AnnotationStore, images_dir: str | Path | None = None,
               ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="pipescale annotation service")

    @app.get("/api/sequences")
    def list_sequences():
        return [
            {
                "sequence_id": s.sequence_id,
                "dataset_label": s.dataset_label,
                "n_pairs": s.n_pairs,
            }
            for s in sorted(store.sequences(), key=lambda s: s.sequence_id)
        ]

    def _pair_payload(seq: AnnotationSequence, pair_id: str) -> dict:
        pair = seq.pair(pair_id)

        def side(report_id: str) -> dict:
            payload = store.payload(seq.sequence_id, report_id)
            return {
                "report_id": report_id,
                "insight": payload.get("insight", ""),
                "image_url": payload.get("image_url", ""),
            }

        return {
            "pair_id": pair.pair_id,
            "index": pair.presented_order,
            "total": seq.n_pairs,
            "left": side(pair.left_report),
            "right": side(pair.right_report),
        }

    @app.get("/api/sequences/{sequence_id}/next")
    def next_pair(sequence_id: str, annotator_id: str):
        try:
            seq = store.sequence(sequence_id)
        except KeyError:
            raise HTTPException(404, f"unknown sequence {sequence_id}")
        answered = store.answered(sequence_id, annotator_id)
        for pair in seq.pairs:
            if pair.pair_id not in answered:
                return {"done": False, "pair": _pair_payload(seq, pair.pair_id)}
        return {"done": True, "pair": None}

    @app.get("/api/sequences/{sequence_id}/progress")
    def progress(sequence_id: str, annotator_id: str):
        try:
            seq = store.sequence(sequence_id)
        except KeyError:
            raise HTTPException(404, f"unknown sequence {sequence_id}")
        answered = store.answered(sequence_id, annotator_id)
        return {"answered": len(answered), "total": seq.n_pairs}

    @app.post("/api/sequences/{sequence_id}/records", status_code=201)
    def post_record(sequence_id: str, record: RecordIn):
        try:
            store.add_record(sequence_id, PreferenceRecord(**record.model_dump()))
        except DuplicateAnswerError as exc:
            raise HTTPException(409, str(exc))
        except KeyError as exc:
            raise HTTPException(404, f"unknown sequence or pair: {exc}")
        except AnnotationError as exc:
            raise HTTPException(422, str(exc))
        return {"status": "recorded"}

    @app.get("/api/sequences/{sequence_id}/tally")
    def tally(sequence_id: str):
        try:
            tallies = store.tallies(sequence_id)
        except KeyError:
            raise HTTPException(404, f"unknown sequence {sequence_id}")
        return {"tallies": [t.to_dict() for t in tallies]}

    @app.get("/api/sequences/{sequence_id}/consensus")
    def consensus_endpoint(sequence_id: str):
        tallies = store.tallies(sequence_id)
        if not tallies:
            raise HTTPException(409, "no completed annotator yet")
        ranking, tied = consensus(tallies)
        return {"ranking": list(ranking.items), "tied": tied}

    @app.get("/api/export")
    def export():
        return JSONResponse(store.export_doc())

    @app.put("/api/import")
    def import_(doc: dict):
        count = store.import_doc(doc)
        return {"imported_sequences": count}

    if images_dir is not None:
        app.mount("/images", StaticFiles(directory=str(images_dir)), name="images")
    if ui_dir is not None and Path(ui_dir).exists():
        ui_path = Path(ui_dir)

        @app.get("/")
        def index():
            return FileResponse(ui_path / "index.html")

        app.mount("/ui", StaticFiles(directory=str(ui_path)), name="ui")
    return app

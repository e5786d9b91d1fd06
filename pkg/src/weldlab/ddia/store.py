"""Single-file transactional persistence for audit cases and records.

Backed by sqlite in WAL mode: concurrent reviewers get serialized writes and
non-blocking snapshot reads without an external service. Records are
append-only; resubmission by the same auditor for the same case supersedes
their earlier record at read time (latest wins, history retained).
"""

from __future__ import annotations

import json
import sqlite3
from dataclasses import dataclass
from pathlib import Path

from .records import AuditRecord, ValidationError, validate_record

PENDING = "pending"
REVIEWED = "reviewed"


class StoreError(Exception):
    pass


class NotFoundError(StoreError):
    pass


@dataclass(frozen=True)
class AuditCase:
    case_id: str
    image_path: str
    pred_class: str
    probabilities: list[float]
    gradcam_overlay_path: str
    lime_overlay_path: str
    status: str = PENDING

    def __post_init__(self):
        if abs(sum(self.probabilities) - 1.0) > 1e-6:
            raise StoreError(f"case {self.case_id}: probabilities do not sum to 1")

    def to_json(self) -> dict:
        return {
            "case_id": self.case_id,
            "image_path": self.image_path,
            "pred_class": self.pred_class,
            "probabilities": self.probabilities,
            "gradcam_overlay_path": self.gradcam_overlay_path,
            "lime_overlay_path": self.lime_overlay_path,
            "status": self.status,
        }


_SCHEMA = """
CREATE TABLE IF NOT EXISTS cases (
    case_id TEXT PRIMARY KEY,
    image_path TEXT NOT NULL,
    pred_class TEXT NOT NULL,
    probabilities TEXT NOT NULL,
    gradcam_overlay_path TEXT NOT NULL,
    lime_overlay_path TEXT NOT NULL,
    status TEXT NOT NULL DEFAULT 'pending'
);
CREATE TABLE IF NOT EXISTS records (
    record_id INTEGER PRIMARY KEY AUTOINCREMENT,
    case_id TEXT NOT NULL REFERENCES cases(case_id),
    auditor_id TEXT NOT NULL,
    payload TEXT NOT NULL,
    timestamp REAL NOT NULL
);
CREATE INDEX IF NOT EXISTS idx_records_case ON records(case_id, auditor_id);
"""


class AuditStore:
    """One store per database file; every method opens a short-lived
    connection, so instances are safe to share across threads."""

    def __init__(self, path: str | Path):
        self.path = str(path)
        with self._connect() as conn:
            conn.executescript(_SCHEMA)

    def _connect(self) -> sqlite3.Connection:
        conn = sqlite3.connect(self.path, timeout=30.0)
        conn.execute("PRAGMA journal_mode=WAL")
        conn.row_factory = sqlite3.Row
        return conn

    # -- cases ------------------------------------------------------------

    def add_case(self, case: AuditCase) -> None:
        with self._connect() as conn:
            try:
                conn.execute(
                    "INSERT INTO cases VALUES (?,?,?,?,?,?,?)",
                    (case.case_id, case.image_path, case.pred_class,
                     json.dumps(case.probabilities),
                     case.gradcam_overlay_path, case.lime_overlay_path,
                     case.status))
            except sqlite3.IntegrityError as exc:
                raise StoreError(f"case {case.case_id} already exists") from exc

    def get_case(self, case_id: str) -> AuditCase:
        with self._connect() as conn:
            row = conn.execute("SELECT * FROM cases WHERE case_id=?",
                               (case_id,)).fetchone()
        if row is None:
            raise NotFoundError(f"unknown case: {case_id}")
        return self._row_to_case(row)

    def list_cases(self, status: str | None = None, page: int = 1,
                   page_size: int = 20) -> tuple[list[AuditCase], int]:
        if page < 1 or page_size < 1:
            raise StoreError("page and page_size must be >= 1")
        where = "WHERE status=?" if status else ""
        args: tuple = (status,) if status else ()
        with self._connect() as conn:
            total = conn.execute(f"SELECT COUNT(*) FROM cases {where}", args).fetchone()[0]
            rows = conn.execute(
                f"SELECT * FROM cases {where} ORDER BY case_id LIMIT ? OFFSET ?",
                args + (page_size, (page - 1) * page_size)).fetchall()
        return [self._row_to_case(r) for r in rows], total

    @staticmethod
    def _row_to_case(row: sqlite3.Row) -> AuditCase:
        return AuditCase(
            case_id=row["case_id"], image_path=row["image_path"],
            pred_class=row["pred_class"],
            probabilities=json.loads(row["probabilities"]),
            gradcam_overlay_path=row["gradcam_overlay_path"],
            lime_overlay_path=row["lime_overlay_path"], status=row["status"])

    # -- records ----------------------------------------------------------

    def submit_record(self, record: AuditRecord | dict) -> int:
        """Validate and append one record; flips the case to reviewed.

        The record is appended even if the auditor already reviewed the case;
        aggregation keeps only their latest answer.
        """
        payload = record.to_json() if isinstance(record, AuditRecord) else dict(record)
        errors = validate_record(payload)
        if errors:
            raise ValidationError(errors)
        with self._connect() as conn:
            exists = conn.execute("SELECT 1 FROM cases WHERE case_id=?",
                                  (payload["case_id"],)).fetchone()
            if exists is None:
                raise NotFoundError(f"unknown case: {payload['case_id']}")
            cur = conn.execute(
                "INSERT INTO records (case_id, auditor_id, payload, timestamp)"
                " VALUES (?,?,?,?)",
                (payload["case_id"], payload["auditor_id"],
                 json.dumps(payload), payload["timestamp"]))
            conn.execute("UPDATE cases SET status=? WHERE case_id=?",
                         (REVIEWED, payload["case_id"]))
            return cur.lastrowid

    def all_records(self) -> list[AuditRecord]:
        """Full history, insertion order."""
        with self._connect() as conn:
            rows = conn.execute(
                "SELECT payload FROM records ORDER BY record_id").fetchall()
        return [AuditRecord.from_json(json.loads(r["payload"])) for r in rows]

    def case_records(self, case_id: str) -> list[AuditRecord]:
        with self._connect() as conn:
            rows = conn.execute(
                "SELECT payload FROM records WHERE case_id=? ORDER BY record_id",
                (case_id,)).fetchall()
        return [AuditRecord.from_json(json.loads(r["payload"])) for r in rows]

    def export_records(self, path: str | Path) -> int:
        records = self.all_records()
        with Path(path).open("w") as f:
            for r in records:
                f.write(json.dumps(r.to_json()) + "\n")
        return len(records)

    def import_records(self, path: str | Path) -> int:
        count = 0
        with Path(path).open() as f:
            for line in f:
                if line.strip():
                    self.submit_record(json.loads(line))
                    count += 1
        return count

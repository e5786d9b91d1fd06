"""JSON-over-HTTP review service.

Endpoints: paginated case listing, single-case fetch with overlay artifact
references, record submission (validated with the same rules as the store),
the aggregate report, and full record export. Overlay images are served as
static files under /overlays.
"""

from __future__ import annotations

import sqlite3
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .aggregate import aggregate
from .records import ValidationError
from .store import AuditStore, NotFoundError, StoreError


def create_app(store: AuditStore, overlay_root: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="weld audit review service")

    @app.exception_handler(ValidationError)
    async def _validation_error(_req: Request, exc: ValidationError):
        return JSONResponse(status_code=422, content={"errors": exc.errors})

    @app.exception_handler(NotFoundError)
    async def _not_found(_req: Request, exc: NotFoundError):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(sqlite3.Error)
    async def _db_error(_req: Request, exc: sqlite3.Error):
        return JSONResponse(status_code=503,
                            content={"detail": str(exc), "retryable": True})

    @app.exception_handler(StoreError)
    async def _store_error(_req: Request, exc: StoreError):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.get("/api/health")
    def health():
        return {"status": "ok"}

    @app.get("/api/cases")
    def list_cases(status: str | None = None, page: int = 1, page_size: int = 20):
        cases, total = store.list_cases(status=status, page=page, page_size=page_size)
        pages = (total + page_size - 1) // page_size
        return {"cases": [c.to_json() for c in cases], "total": total,
                "page": page, "page_size": page_size, "pages": pages}

    @app.get("/api/cases/{case_id}")
    def get_case(case_id: str):
        case = store.get_case(case_id)
        payload = case.to_json()
        payload["records"] = [r.to_json() for r in store.case_records(case_id)]
        return payload

    @app.post("/api/records", status_code=201)
    def submit_record(payload: dict):
        record_id = store.submit_record(payload)
        return {"record_id": record_id}

    @app.get("/api/report")
    def report():
        records = store.all_records()
        if not records:
            return {"n_records": 0}
        return aggregate(records).to_json()

    @app.get("/api/records/export")
    def export_records():
        return {"records": [r.to_json() for r in store.all_records()]}

    if overlay_root is not None:
        app.mount("/overlays", StaticFiles(directory=str(overlay_root)),
                  name="overlays")
    return app

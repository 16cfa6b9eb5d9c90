"""HTTP surface for the annotation loop and report browsing.

The API is a thin shell over :class:`BootstrapSession` (which serializes all
mutations) and a rendered phrase report. Error bodies are always
``{"code", "message", "detail"}``; malformed request bodies map to 400,
unserved/duplicate labels to 409, and premature round closure to 412.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .bootstrap import (
    AnnotationRecord,
    BootstrapError,
    BootstrapSession,
    DuplicateLabelError,
    QuotaNotMetError,
    RoundStateError,
    UnservedSentenceError,
)


class LabelBody(BaseModel):
    sentence_id: str
    label: str  # "positive" | "negative"
    annotator_id: str = "anonymous"


def _error(status: int, code: str, message: str, detail: dict | None = None) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"code": code, "message": message, "detail": detail or {}},
    )


class ReportProvider:
    """Serves the rendered phrase report from disk, reloading on change."""

    def __init__(self, path: Path | None):
        self.path = Path(path) if path else None
        self._cached: dict | None = None
        self._mtime: float | None = None

    def get(self) -> dict | None:
        if self.path is None or not self.path.exists():
            return None
        mtime = self.path.stat().st_mtime
        if self._cached is None or mtime != self._mtime:
            self._cached = json.loads(self.path.read_text(encoding="utf-8"))
            self._mtime = mtime
        return self._cached


def create_app(
    session: BootstrapSession | None = None,
    report_path: Path | str | None = None,
) -> FastAPI:
    app = FastAPI(title="radminer annotation service")
    reports = ReportProvider(Path(report_path) if report_path else None)

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        return _error(400, "malformed_body", "request body failed validation", {"errors": exc.errors()})

    def require_session() -> BootstrapSession | JSONResponse:
        if session is None:
            return _error(409, "no_session", "no bootstrap session is loaded")
        return session

    @app.get("/api/health")
    def health():
        return {"status": "ok", "session_loaded": session is not None}

    @app.get("/api/queue")
    def queue():
        sess = require_session()
        if isinstance(sess, JSONResponse):
            return sess
        return sess.queue_view()

    @app.post("/api/labels")
    def submit_label(body: LabelBody):
        sess = require_session()
        if isinstance(sess, JSONResponse):
            return sess
        if body.label not in ("positive", "negative"):
            return _error(400, "bad_label", "label must be 'positive' or 'negative'", {"label": body.label})
        record = AnnotationRecord(
            sentence_id=body.sentence_id,
            label=body.label == "positive",
            annotator_id=body.annotator_id,
            timestamp=time.time(),
        )
        try:
            return sess.submit(record)
        except (UnservedSentenceError, DuplicateLabelError) as exc:
            return _error(409, "label_conflict", str(exc), {"sentence_id": record.sentence_id})
        except RoundStateError as exc:
            return _error(409, "no_open_round", str(exc))

    @app.post("/api/rounds/close")
    def close_round():
        sess = require_session()
        if isinstance(sess, JSONResponse):
            return sess
        try:
            return sess.close_round()
        except QuotaNotMetError as exc:
            return _error(412, "quota_not_met", str(exc), {"remaining": exc.remaining})
        except RoundStateError as exc:
            return _error(409, "no_open_round", str(exc))
        except BootstrapError as exc:
            return _error(409, "bootstrap_error", str(exc))

    @app.get("/api/iterations")
    def iterations():
        sess = require_session()
        if isinstance(sess, JSONResponse):
            return sess
        return sess.history_view()

    @app.get("/api/phrases")
    def phrases(min_freq: int | None = None):
        report = reports.get()
        if report is None:
            return _error(409, "no_report", "no phrase report has been rendered")
        entries = report.get("phrases", [])
        if min_freq is not None:
            entries = [e for e in entries if e["frequency"] >= min_freq]
        return {
            "min_frequency": min_freq if min_freq is not None else report.get("min_frequency"),
            "phrases": [
                {"normalized": e["normalized"], "frequency": e["frequency"], "n_exemplars": len(e["exemplars"])}
                for e in entries
            ],
        }

    @app.get("/api/phrases/{phrase}/sentences")
    def phrase_sentences(phrase: str):
        report = reports.get()
        if report is None:
            return _error(409, "no_report", "no phrase report has been rendered")
        # Accept both the literal phrase and a hyphenated slug of it.
        wanted = {phrase, phrase.replace("-", " ")}
        for entry in report.get("phrases", []):
            if entry["normalized"] in wanted:
                return {
                    "normalized": entry["normalized"],
                    "frequency": entry["frequency"],
                    "exemplars": entry["exemplars"][:5],
                }
        return _error(404, "unknown_phrase", f"phrase not in report: {phrase!r}", {"phrase": phrase})

    return app

"""HTTP front end for the human oracle.

Versioned JSON API under /v1:

* ``GET  /v1/runs/{run_id}/requests?state=pending`` -- open label queries,
  payloads rendered as base64 PNG (images) or raw coordinates (points).
* ``POST /v1/runs/{run_id}/answers`` with ``{"request_id", "label"}``.
* ``GET  /v1/runs/{run_id}/status`` -- live run progress.

A static labeling UI (frontend/dist) is mounted at /ui when present.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, Header, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .errors import ParameterError, RequestRejected
from .oracle import OracleQueue


@dataclass
class RunStatus:
    """Mutable run progress shared between the loop thread and the API."""

    iteration: int = 0
    total_iterations: int = 0
    val_acc: float | None = None
    n_labeled: int = 0
    labels_acquired: int = 0
    label_budget: int = 0
    theta: float | None = None
    state: str = "running"
    history: list = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def update(self, report):
        with self._lock:
            self.iteration = report.iteration
            self.val_acc = report.val_acc
            self.n_labeled = report.n_labeled
            self.labels_acquired += report.n_acquired
            self.theta = report.theta
            self.history.append(report.val_acc)

    def finish(self):
        with self._lock:
            self.state = "done"

    def snapshot(self):
        with self._lock:
            return {
                "iteration": self.iteration,
                "total_iterations": self.total_iterations,
                "val_acc": self.val_acc,
                "n_labeled": self.n_labeled,
                "labels_acquired": self.labels_acquired,
                "label_budget": self.label_budget,
                "theta": self.theta,
                "state": self.state,
                "history": list(self.history),
            }


@dataclass
class RunHandle:
    queue: OracleQueue
    status: RunStatus
    n_classes: int


class AnswerBody(BaseModel):
    request_id: str
    label: int


def create_app(runs: dict[str, RunHandle], token: str | None = None) -> FastAPI:
    app = FastAPI(title="deepbass oracle service", version="1")

    def handle(run_id: str) -> RunHandle:
        h = runs.get(run_id)
        if h is None:
            raise HTTPException(status_code=404, detail=f"unknown run {run_id!r}")
        return h

    def check_token(given):
        if token is not None and given != token:
            raise HTTPException(status_code=403, detail="bad or missing run token")

    @app.get("/v1/runs/{run_id}/requests")
    def list_requests(
        run_id: str, state: str = "pending", x_run_token: str | None = Header(None)
    ):
        check_token(x_run_token)
        if state != "pending":
            raise HTTPException(status_code=422, detail="only state=pending is supported")
        h = handle(run_id)
        now = h.queue._clock()
        return {
            "requests": [
                {
                    "request_id": r.request_id,
                    "sample_id": r.sample_id,
                    "payload": r.payload,
                    "entropy": r.entropy,
                    "suggestion": r.suggestion,
                    "issued_iteration": r.issued_iteration,
                    "age_s": max(0.0, now - r.issued_at),
                }
                for r in h.queue.pending_requests()
            ]
        }

    @app.post("/v1/runs/{run_id}/answers")
    def submit_answer(
        run_id: str, body: AnswerBody, x_run_token: str | None = Header(None)
    ):
        check_token(x_run_token)
        h = handle(run_id)
        try:
            answer = h.queue.submit_answer(body.request_id, body.label)
        except RequestRejected as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except ParameterError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return {"status": "accepted", "request_id": answer.request_id}

    @app.get("/v1/runs/{run_id}/status")
    def status(run_id: str, x_run_token: str | None = Header(None)):
        check_token(x_run_token)
        return handle(run_id).status.snapshot()

    ui_dir = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if ui_dir.is_dir():
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app

"""Oracle implementations: a simulated oracle answering from the hidden
truth table, and a thread-safe FIFO queue for a human labeler with
optional expiry and an append-only JSON-lines journal."""

from __future__ import annotations

import json
import threading
import time
from dataclasses import asdict, dataclass, field

from .errors import OracleError, ParameterError, RequestRejected

SOURCE_SIMULATED = "simulated"
SOURCE_HUMAN = "human"


@dataclass
class OracleRequest:
    """One label query: which sample, what the model currently believes."""

    request_id: str
    sample_id: int
    payload: dict
    entropy: float
    suggestion: int
    issued_iteration: int
    issued_at: float = field(default_factory=time.time)


@dataclass
class OracleAnswer:
    request_id: str
    label: int
    answered_at: float
    source: str
    sample_id: int = -1


class SimulatedOracle:
    """Answers every request immediately from the hidden truth table."""

    def __init__(self, truth):
        self._truth = truth
        self._seen_ids = set()
        self._ready = []

    def submit(self, requests):
        for req in requests:
            if req.request_id in self._seen_ids:
                raise RequestRejected(f"duplicate request id {req.request_id!r}")
            self._seen_ids.add(req.request_id)
            try:
                label = int(self._truth.reveal(req.sample_id))
            except KeyError as exc:
                raise OracleError(f"unknown sample id {req.sample_id}") from exc
            self._ready.append(
                OracleAnswer(
                    request_id=req.request_id,
                    label=label,
                    answered_at=time.time(),
                    source=SOURCE_SIMULATED,
                    sample_id=req.sample_id,
                )
            )

    def poll(self):
        answers, self._ready = self._ready, []
        return answers

    def pending_sample_ids(self):
        return set()


class OracleQueue:
    """Shared FIFO of outstanding label requests.

    One producer (the training loop) enqueues; any number of consumers list
    pending requests and submit answers, at most one answer per request.
    Requests expire after `timeout_s` (the sample stays selectable later).
    When a journal path is given, every request and answer is appended as a
    JSON line before the call returns, so answers are durable before ack.
    """

    def __init__(self, n_classes, timeout_s=None, journal_path=None, clock=time.time):
        self.n_classes = n_classes
        self.timeout_s = timeout_s
        self._clock = clock
        self._lock = threading.Lock()
        self._requests = {}  # request_id -> OracleRequest, insertion ordered
        self._answers = {}  # request_id -> OracleAnswer
        self._unpolled = []
        self._journal_path = journal_path
        self._journal = open(journal_path, "a") if journal_path else None

    # -- producer side -------------------------------------------------

    def enqueue(self, request: OracleRequest) -> str:
        """Register a request; returns its id as the pending ticket."""
        with self._lock:
            if request.request_id in self._requests:
                raise RequestRejected(f"duplicate request id {request.request_id!r}")
            self._requests[request.request_id] = request
            self._journal_write({"type": "request", **asdict(request)})
        return request.request_id

    def submit(self, requests):
        for req in requests:
            self.enqueue(req)

    def poll_answers(self):
        """Drain answers that arrived since the previous poll."""
        with self._lock:
            answers, self._unpolled = self._unpolled, []
        return answers

    poll = poll_answers

    def pending_sample_ids(self):
        now = self._clock()
        with self._lock:
            return {
                r.sample_id
                for r in self._requests.values()
                if r.request_id not in self._answers and not self._expired(r, now)
            }

    # -- consumer side -------------------------------------------------

    def pending_requests(self):
        """Open, unexpired requests in FIFO order."""
        now = self._clock()
        with self._lock:
            return [
                r
                for r in self._requests.values()
                if r.request_id not in self._answers and not self._expired(r, now)
            ]

    def submit_answer(self, request_id, label, source=SOURCE_HUMAN) -> OracleAnswer:
        now = self._clock()
        with self._lock:
            req = self._requests.get(request_id)
            if req is None:
                raise RequestRejected(f"unknown request id {request_id!r}")
            if request_id in self._answers:
                raise RequestRejected(f"request {request_id!r} was already answered")
            if self._expired(req, now):
                raise RequestRejected(f"request {request_id!r} has expired")
            label = int(label)
            if not 1 <= label <= self.n_classes:
                raise ParameterError(
                    f"label {label} outside the class range 1..{self.n_classes}"
                )
            answer = OracleAnswer(
                request_id=request_id,
                label=label,
                answered_at=now,
                source=source,
                sample_id=req.sample_id,
            )
            self._journal_write({"type": "answer", **asdict(answer)})
            self._answers[request_id] = answer
            self._unpolled.append(answer)
        return answer

    def counts(self):
        now = self._clock()
        with self._lock:
            pending = sum(
                1
                for r in self._requests.values()
                if r.request_id not in self._answers and not self._expired(r, now)
            )
            return {
                "requests": len(self._requests),
                "answered": len(self._answers),
                "pending": pending,
            }

    # -- internals -----------------------------------------------------

    def _expired(self, request, now):
        return self.timeout_s is not None and now - request.issued_at > self.timeout_s

    def _journal_write(self, record):
        if self._journal is None:
            return
        self._journal.write(json.dumps(record) + "\n")
        self._journal.flush()

    def close(self):
        if self._journal is not None:
            self._journal.close()
            self._journal = None

    @classmethod
    def restore(cls, journal_path, n_classes, timeout_s=None, clock=time.time):
        """Rebuild queue state by replaying a journal, then keep appending to it."""
        queue = cls(n_classes, timeout_s=timeout_s, clock=clock)
        try:
            with open(journal_path) as f:
                for line in f:
                    line = line.strip()
                    if not line:
                        continue
                    record = json.loads(line)
                    kind = record.pop("type")
                    if kind == "request":
                        queue._requests[record["request_id"]] = OracleRequest(**record)
                    elif kind == "answer":
                        ans = OracleAnswer(**record)
                        queue._answers[ans.request_id] = ans
                        queue._unpolled.append(ans)
        except FileNotFoundError:
            pass
        queue._journal_path = journal_path
        queue._journal = open(journal_path, "a")
        return queue

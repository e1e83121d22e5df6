import numpy as np
import pytest

from deepbass.data import HiddenTruth
from deepbass.errors import OracleError, ParameterError, RequestRejected
from deepbass.oracle import (
    SOURCE_HUMAN,
    SOURCE_SIMULATED,
    OracleQueue,
    OracleRequest,
    SimulatedOracle,
)


def req(rid, sid=0, iteration=1, issued_at=None):
    r = OracleRequest(
        request_id=rid, sample_id=sid, payload={}, entropy=0.5, suggestion=1,
        issued_iteration=iteration,
    )
    if issued_at is not None:
        r.issued_at = issued_at
    return r


class TestSimulatedOracle:
    def test_answers_from_hidden_truth(self):
        oracle = SimulatedOracle(HiddenTruth(np.array([3, 7, 1, 2])))
        oracle.submit([req("a", sid=1)])
        answers = oracle.poll()
        assert len(answers) == 1
        assert answers[0].label == 7
        assert answers[0].source == SOURCE_SIMULATED

    def test_duplicate_request_id_rejected(self):
        oracle = SimulatedOracle(HiddenTruth(np.array([1, 2])))
        oracle.submit([req("a", sid=0)])
        with pytest.raises(RequestRejected, match="duplicate"):
            oracle.submit([req("a", sid=1)])

    def test_unknown_sample_id(self):
        oracle = SimulatedOracle(HiddenTruth(np.array([1, 2])))
        with pytest.raises(OracleError, match="unknown sample"):
            oracle.submit([req("a", sid=99)])

    def test_poll_drains(self):
        oracle = SimulatedOracle(HiddenTruth(np.array([1, 2])))
        oracle.submit([req("a", sid=0)])
        assert len(oracle.poll()) == 1
        assert oracle.poll() == []


class TestOracleQueue:
    def test_enqueue_answer_poll(self):
        q = OracleQueue(n_classes=10)
        q.enqueue(req("a", sid=5))
        q.submit_answer("a", 3)
        answers = q.poll_answers()
        assert len(answers) == 1
        assert answers[0].label == 3
        assert answers[0].sample_id == 5
        assert answers[0].source == SOURCE_HUMAN

    def test_poll_empty(self):
        assert OracleQueue(n_classes=2).poll_answers() == []

    def test_double_answer_rejected(self):
        q = OracleQueue(n_classes=10)
        q.enqueue(req("a"))
        q.submit_answer("a", 3)
        with pytest.raises(RequestRejected, match="already answered"):
            q.submit_answer("a", 4)

    def test_unknown_request_rejected(self):
        q = OracleQueue(n_classes=10)
        with pytest.raises(RequestRejected, match="unknown"):
            q.submit_answer("nope", 1)

    def test_invalid_label_rejected(self):
        q = OracleQueue(n_classes=10)
        q.enqueue(req("a"))
        with pytest.raises(ParameterError, match="label"):
            q.submit_answer("a", 11)

    def test_duplicate_enqueue_rejected(self):
        q = OracleQueue(n_classes=10)
        q.enqueue(req("a"))
        with pytest.raises(RequestRejected, match="duplicate"):
            q.enqueue(req("a"))

    def test_expiry_hides_request_and_rejects_answer(self):
        now = [100.0]
        q = OracleQueue(n_classes=10, timeout_s=10.0, clock=lambda: now[0])
        q.enqueue(req("a", sid=4, issued_at=100.0))
        assert [r.request_id for r in q.pending_requests()] == ["a"]
        assert q.pending_sample_ids() == {4}
        now[0] = 111.0
        assert q.pending_requests() == []
        assert q.pending_sample_ids() == set()  # sample selectable again
        with pytest.raises(RequestRejected, match="expired"):
            q.submit_answer("a", 2)

    def test_fifo_pending_order(self):
        q = OracleQueue(n_classes=10)
        for i in range(5):
            q.enqueue(req(f"r{i}", sid=i))
        assert [r.request_id for r in q.pending_requests()] == [
            "r0", "r1", "r2", "r3", "r4",
        ]

    def test_journal_restores_state(self, tmp_path):
        journal = tmp_path / "journal.jsonl"
        q = OracleQueue(n_classes=10, journal_path=str(journal))
        q.enqueue(req("a", sid=1))
        q.enqueue(req("b", sid=2))
        q.submit_answer("a", 7)
        q.close()

        restored = OracleQueue.restore(str(journal), n_classes=10)
        # the answer survives the restart and is re-delivered on poll
        answers = restored.poll_answers()
        assert [a.request_id for a in answers] == ["a"]
        assert answers[0].label == 7
        # the unanswered request is still pending, the answered one is not
        assert [r.request_id for r in restored.pending_requests()] == ["b"]
        with pytest.raises(RequestRejected):
            restored.submit_answer("a", 3)
        restored.submit_answer("b", 2)
        restored.close()

    def test_counts(self):
        q = OracleQueue(n_classes=10)
        q.enqueue(req("a"))
        q.enqueue(req("b", sid=1))
        q.submit_answer("a", 1)
        assert q.counts() == {"requests": 2, "answered": 1, "pending": 1}

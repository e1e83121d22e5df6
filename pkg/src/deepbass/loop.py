"""The active EM training loop with pseudo-label admission, ground-truth
upsampling and pluggable label acquisition.

Each iteration, in order: apply late oracle answers, run MC-dropout
inference over the unlabeled pool, rebuild the pseudo-labeled additions
under the configured threshold policy, optionally query the oracle for
new ground truth, then assemble one epoch (ground truth repeated
`upsample_factor` times plus pseudo entries once each, shuffled) and
train on it.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import mc
from .data import DataPools, augment
from .errors import ConfigError, OracleError, ParameterError
from .oracle import OracleRequest

THRESHOLD_POLICIES = ("all_data", "step_wise", "none")
ACQUISITION_POLICIES = ("max_entropy", "above_average", "none")

# column order for CSV reports
REPORT_COLUMNS = ("iteration", "val_acc", "n_labeled", "n_pseudo", "pseudo_err", "theta")


@dataclass
class LoopConfig:
    """All hyperparameters of one training run."""

    threshold_policy: str = "step_wise"
    acquisition_policy: str = "none"
    acquire_count: int = 0
    acquire_every: int = 1
    iterations: int = 0
    upsample_factor: int = 20
    mc: mc.McConfig = field(default_factory=mc.McConfig)
    batch_size: int = 256
    seed: int = 0
    initial_presentations: int = 2000
    augment_ground_truth: bool = False
    # with a slow (human) oracle: hold the loop at an acquisition event while
    # this many requests are outstanding, so a fast loop cannot flood the
    # queue; answers and expiries release it. None disables pacing.
    max_pending: int | None = None
    pending_poll_s: float = 0.5

    def __post_init__(self):
        if isinstance(self.mc, dict):
            self.mc = mc.McConfig(**self.mc)
        if self.threshold_policy not in THRESHOLD_POLICIES:
            raise ConfigError(
                f"threshold_policy must be one of {THRESHOLD_POLICIES}, "
                f"got {self.threshold_policy!r}"
            )
        if self.acquisition_policy not in ACQUISITION_POLICIES:
            raise ConfigError(
                f"acquisition_policy must be one of {ACQUISITION_POLICIES}, "
                f"got {self.acquisition_policy!r}"
            )
        if self.acquire_every < 1:
            raise ConfigError(f"acquire_every must be >= 1, got {self.acquire_every}")
        if self.upsample_factor < 1:
            raise ConfigError(
                f"upsample_factor must be >= 1, got {self.upsample_factor}"
            )
        if self.max_pending is not None and self.max_pending < 1:
            raise ConfigError(f"max_pending must be >= 1, got {self.max_pending}")


@dataclass
class IterationReport:
    iteration: int
    val_acc: float
    n_labeled: int
    n_pseudo: int
    pseudo_err: float | None
    theta: float | None
    n_acquired: int = 0
    oracle_error: bool = False
    max_admitted_entropy: float | None = None

    def row(self):
        return {k: getattr(self, k) for k in REPORT_COLUMNS}


def train_step(model, xb, yb, adam, rng):
    """One optimizer step on a mini-batch; returns the regularized loss."""
    tape = ad.Tape()
    logits = model.logits(xb, mode="train", rng=rng, tape=tape)
    loss = ad.softmax_cross_entropy(logits, yb, tape)
    for lam, group in model.l2_groups():
        loss = ad.add(loss, ad.l2_penalty(group, lam, tape), tape)
    adam.zero_grad()
    tape.backward(loss)
    adam.step()
    return float(loss.data)


def accuracy(model, inputs, labels, batch_size=1024):
    """Eval-mode classification accuracy (dropout off, single pass)."""
    inputs = np.asarray(inputs)
    labels = np.asarray(labels)
    hits = 0
    for start in range(0, inputs.shape[0], batch_size):
        stop = min(start + batch_size, inputs.shape[0])
        probs = model.forward(inputs[start:stop], mode="eval")
        hits += int((mc.pseudo_label(probs) == labels[start:stop]).sum())
    return hits / inputs.shape[0]


def _epoch_arrays(pools: DataPools, cfg: LoopConfig, rng):
    """Assemble one epoch: GT ids tiled upsample_factor times, pseudo once."""
    gt_ids = np.tile(pools.labeled_ids, cfg.upsample_factor)
    gt_labels = np.tile(pools.labels, cfg.upsample_factor)
    ids = np.concatenate([gt_ids, pools.pseudo_ids])
    labels = np.concatenate([gt_labels, pools.pseudo_labels])
    is_gt = np.zeros(ids.shape[0], dtype=bool)
    is_gt[: gt_ids.shape[0]] = True
    perm = rng.permutation(ids.shape[0])
    return ids[perm], labels[perm], is_gt[perm]


def _train_epoch(state, ids, labels, is_gt):
    cfg = state.cfg
    pools = state.pools
    total = 0.0
    n_batches = 0
    for start in range(0, ids.shape[0], cfg.batch_size):
        stop = min(start + cfg.batch_size, ids.shape[0])
        xb = pools.inputs[ids[start:stop]]
        if cfg.augment_ground_truth:
            xb = xb.copy()
            for j in np.flatnonzero(is_gt[start:stop]):
                xb[j] = augment(xb[j], state.rng)
        total += train_step(state.model, xb, labels[start:stop], state.adam, state.rng)
        n_batches += 1
    return total / max(n_batches, 1)


def initial_train(model, pools, presentations, *, cfg=None, rng=None, adam=None):
    """Train on the labeled pool only, presenting each sample
    `presentations` times. Returns the final training accuracy."""
    if pools.n_labeled == 0:
        raise ConfigError("initial training needs a nonempty labeled pool")
    cfg = cfg or LoopConfig()
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    adam = adam or ad.Adam(model.trainable)
    inputs = pools.labeled_inputs()
    labels = pools.labels
    for _ in range(presentations):
        perm = rng.permutation(inputs.shape[0])
        for start in range(0, inputs.shape[0], cfg.batch_size):
            sel = perm[start : start + cfg.batch_size]
            xb = inputs[sel]
            if cfg.augment_ground_truth:
                xb = np.stack([augment(x, rng) for x in xb])
            train_step(model, xb, labels[sel], adam, rng)
    return accuracy(model, inputs, labels)


@dataclass
class LoopState:
    """Everything that persists across EM iterations (incl. optimizer state)."""

    model: object
    pools: DataPools
    cfg: LoopConfig
    rng: np.random.Generator
    adam: ad.Adam
    val_inputs: np.ndarray
    val_labels: np.ndarray
    truth: object = None  # diagnostics only (pseudo-label error rate)
    payload_fn: object = None
    run_id: str = "run"
    iteration: int = 0
    request_seq: int = 0


def _apply_answers(state: LoopState, answers):
    applied = 0
    for ans in answers:
        if ans.sample_id in state.pools.unlabeled_ids:
            state.pools.acquire(ans.sample_id, ans.label)
            applied += 1
    return applied


def _select_max_entropy(entropies, candidates, k):
    """Positions (into `entropies`) of the k largest values among
    `candidates`; descending entropy, ties broken by pool order."""
    if k <= 0 or candidates.size == 0:
        return np.empty(0, dtype=np.int64)
    order = candidates[np.argsort(-entropies[candidates], kind="stable")]
    return order[: min(k, order.size)]


def _select_above_average(entropies, candidates, mean_entropy, k, rng):
    """Uniform k-subset of candidates with entropy strictly above the mean;
    shortfall is filled by max-entropy among the rest."""
    if k <= 0 or candidates.size == 0:
        return np.empty(0, dtype=np.int64)
    eligible = candidates[entropies[candidates] > mean_entropy]
    if eligible.size > k:
        chosen = rng.choice(eligible, size=k, replace=False)
        chosen = np.sort(chosen)
    else:
        chosen = eligible
    if chosen.size < k:
        rest = candidates[~np.isin(candidates, chosen)]
        extra = _select_max_entropy(entropies, rest, k - chosen.size)
        chosen = np.concatenate([chosen, extra])
    return chosen.astype(np.int64)


def select_max_entropy(pools, model, cfg: LoopConfig, k, rng):
    """The k unlabeled sample ids with the largest T'-pass MC entropy."""
    if pools.n_unlabeled == 0:
        return np.empty(0, dtype=np.int64)
    dists = mc.mc_average(
        model, pools.unlabeled_inputs(), cfg.mc.passes_unlabeled, rng
    )
    ent = mc.entropy(dists)
    pos = _select_max_entropy(ent, np.arange(ent.shape[0]), k)
    return pools.unlabeled_ids[pos]


def select_above_average(pools, model, cfg: LoopConfig, k, rng):
    """Random k unlabeled ids among those with entropy above the mean
    entropy of all data (labeled and unlabeled, T' passes each)."""
    if k < 1:
        raise ParameterError(f"k must be >= 1, got {k}")
    if pools.n_unlabeled == 0:
        return np.empty(0, dtype=np.int64)
    dists = mc.mc_average(
        model, pools.unlabeled_inputs(), cfg.mc.passes_unlabeled, rng
    )
    ent = mc.entropy(dists)
    mean_ent = _pool_mean_entropy(pools, model, cfg, ent, rng)
    pos = _select_above_average(ent, np.arange(ent.shape[0]), mean_ent, k, rng)
    return pools.unlabeled_ids[pos]


def _pool_mean_entropy(pools, model, cfg, unlabeled_entropies, rng):
    """Mean T'-pass entropy over X union X'."""
    parts = [unlabeled_entropies]
    if pools.n_labeled:
        labeled_dists = mc.mc_average(
            model, pools.labeled_inputs(), cfg.mc.passes_unlabeled, rng
        )
        parts.append(np.atleast_1d(mc.entropy(labeled_dists)))
    return float(np.concatenate(parts).mean())


def _make_requests(state: LoopState, positions, entropies, plabels):
    requests = []
    for pos in positions:
        sid = int(state.pools.unlabeled_ids[pos])
        state.request_seq += 1
        payload = state.payload_fn(state.pools.inputs[sid]) if state.payload_fn else {}
        requests.append(
            OracleRequest(
                request_id=f"{state.run_id}-{state.request_seq:06d}",
                sample_id=sid,
                payload=payload,
                entropy=float(entropies[pos]),
                suggestion=int(plabels[pos]),
                issued_iteration=state.iteration,
            )
        )
    return requests


def em_iteration(state: LoopState, oracle) -> IterationReport:
    """One iteration of the active EM loop; mutates `state` in place."""
    cfg = state.cfg
    pools = state.pools
    state.iteration += 1
    oracle_error = False
    acquired = 0

    # answers that arrived since the previous iteration
    try:
        acquired += _apply_answers(state, oracle.poll())
    except OracleError:
        oracle_error = True

    # (a) MC-dropout inference over the unlabeled pool
    if pools.n_unlabeled:
        dists = mc.mc_average(
            state.model, pools.unlabeled_inputs(), cfg.mc.passes_unlabeled, state.rng
        )
        entropies = np.atleast_1d(mc.entropy(dists))
        plabels = np.atleast_1d(mc.pseudo_label(dists))
    else:
        entropies = np.empty(0)
        plabels = np.empty(0, dtype=np.int64)

    # admission threshold (recomputed every iteration over the current X)
    theta = None
    if cfg.threshold_policy == "all_data":
        theta = 1.0
    elif cfg.threshold_policy == "step_wise":
        theta = mc.ground_truth_threshold(
            state.model, pools.labeled_inputs(), cfg.mc, state.rng
        )

    # (b) rebuild the pseudo-labeled additions from scratch
    max_admitted = None
    if cfg.threshold_policy == "none" or not pools.n_unlabeled:
        pools.set_pseudo([], [])
    else:
        if cfg.threshold_policy == "all_data":
            admit = np.arange(entropies.shape[0])
        else:
            admit = np.flatnonzero(entropies < theta)
        pools.set_pseudo(pools.unlabeled_ids[admit], plabels[admit])
        if admit.size:
            max_admitted = float(entropies[admit].max())

    # (c) label acquisition
    if (
        cfg.acquisition_policy != "none"
        and cfg.acquire_count > 0
        and state.iteration % cfg.acquire_every == 0
        and pools.n_unlabeled
    ):
        try:
            pending = oracle.pending_sample_ids()
            while cfg.max_pending is not None and len(pending) >= cfg.max_pending:
                time.sleep(cfg.pending_poll_s)
                acquired += _apply_answers(state, oracle.poll())
                pending = oracle.pending_sample_ids()
            if pending:
                candidates = np.flatnonzero(~np.isin(pools.unlabeled_ids, list(pending)))
            else:
                candidates = np.arange(pools.n_unlabeled)
            if cfg.acquisition_policy == "max_entropy":
                chosen = _select_max_entropy(entropies, candidates, cfg.acquire_count)
            else:
                mean_ent = _pool_mean_entropy(pools, state.model, cfg, entropies, state.rng)
                chosen = _select_above_average(
                    entropies, candidates, mean_ent, cfg.acquire_count, state.rng
                )
            if chosen.size:
                oracle.submit(_make_requests(state, chosen, entropies, plabels))
                acquired += _apply_answers(state, oracle.poll())
        except OracleError:
            oracle_error = True

    # (d) one training epoch over upsampled ground truth plus pseudo entries
    ids, labels, is_gt = _epoch_arrays(pools, cfg, state.rng)
    _train_epoch(state, ids, labels, is_gt)

    pseudo_err = None
    if state.truth is not None and pools.n_pseudo:
        true_labels = state.truth.reveal(pools.pseudo_ids)
        pseudo_err = float(np.mean(pools.pseudo_labels != true_labels))

    return IterationReport(
        iteration=state.iteration,
        val_acc=accuracy(state.model, state.val_inputs, state.val_labels),
        n_labeled=pools.n_labeled,
        n_pseudo=pools.n_pseudo,
        pseudo_err=pseudo_err,
        theta=theta,
        n_acquired=acquired,
        oracle_error=oracle_error,
        max_admitted_entropy=max_admitted,
    )


def run(
    model,
    pools: DataPools,
    cfg: LoopConfig,
    oracle,
    *,
    val_inputs,
    val_labels,
    rng=None,
    reporter=None,
    truth=None,
    payload_fn=None,
    run_id="run",
    checkpoint_on_error=None,
):
    """Initial training followed by `cfg.iterations` EM iterations.

    Emits an IterationReport per iteration through `reporter` (iteration 0
    reports the initial model). On an unexpected error the current weights
    are checkpointed to `checkpoint_on_error` before re-raising.
    Returns (reports, model).
    """
    rng = rng if rng is not None else np.random.default_rng(cfg.seed)
    adam = ad.Adam(model.trainable)
    state = LoopState(
        model=model,
        pools=pools,
        cfg=cfg,
        rng=rng,
        adam=adam,
        val_inputs=np.asarray(val_inputs),
        val_labels=np.asarray(val_labels),
        truth=truth,
        payload_fn=payload_fn,
        run_id=run_id,
    )
    reports = []

    def emit(report):
        reports.append(report)
        if reporter is not None:
            reporter(report)

    try:
        initial_train(
            model, pools, cfg.initial_presentations, cfg=cfg, rng=rng, adam=adam
        )
        emit(
            IterationReport(
                iteration=0,
                val_acc=accuracy(model, state.val_inputs, state.val_labels),
                n_labeled=pools.n_labeled,
                n_pseudo=0,
                pseudo_err=None,
                theta=None,
            )
        )
        for _ in range(cfg.iterations):
            emit(em_iteration(state, oracle))
    except Exception:
        if checkpoint_on_error is not None:
            model.save(checkpoint_on_error)
        raise
    return reports, model

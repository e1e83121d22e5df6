"""Monte-Carlo dropout inference: averaged stochastic forward passes,
normalized classification entropy, pseudo-labels, and the mean-entropy
admission threshold computed over the ground-truth pool."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass
class McConfig:
    """Forward-pass counts: T' for unlabeled data, T for the labeled pool."""

    passes_unlabeled: int = 10
    passes_labeled: int = 100

    def __post_init__(self):
        if self.passes_unlabeled < 1 or self.passes_labeled < 1:
            raise ParameterError("MC pass counts must be >= 1")


def entropy(dist, axis=-1):
    """Normalized Shannon entropy in [0, 1]; 0*log(0) is taken as 0.

    Uses natural log with a 1/ln(C) normalization, which is base-independent.
    """
    p = np.asarray(dist, dtype=np.float64)
    c = p.shape[axis]
    terms = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
    h = -terms.sum(axis=axis) / np.log(c)
    h = np.clip(h, 0.0, 1.0)
    return float(h) if h.ndim == 0 else h


def pseudo_label(dist, axis=-1):
    """1-based index of the highest probability; ties go to the lowest index."""
    lab = np.argmax(np.asarray(dist), axis=axis) + 1
    return int(lab) if np.ndim(lab) == 0 else lab.astype(np.int64)


def mc_average(model, x, passes, rng, batch_size=1024):
    """Mean class distribution over `passes` dropout-enabled forward passes.

    Accepts a single input or a batch; results are accumulated in float64
    in pass-index order, so a fixed generator state reproduces bitwise.
    """
    if passes < 1:
        raise ParameterError(f"passes must be >= 1, got {passes}")
    xd = np.asarray(x)
    single = xd.shape == tuple(model.spec.input_shape)
    if single:
        xd = xd[None]
    n = xd.shape[0]
    acc = np.zeros((n, model.spec.n_classes), dtype=np.float64)
    for _ in range(passes):
        for start in range(0, n, batch_size):
            stop = min(start + batch_size, n)
            acc[start:stop] += model.forward(xd[start:stop], mode="mc", rng=rng)
    acc /= passes
    return acc[0] if single else acc


def ground_truth_threshold(model, labeled_inputs, cfg: McConfig, rng) -> float:
    """Mean MC-dropout entropy over the ground-truth pool (T passes each)."""
    inputs = np.asarray(labeled_inputs)
    if inputs.shape[0] == 0:
        raise ParameterError("threshold needs a nonempty labeled pool")
    dists = mc_average(model, inputs, cfg.passes_labeled, rng)
    return float(np.mean(entropy(dists)))

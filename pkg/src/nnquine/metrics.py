"""Quine-quality measures.

margin is the RMS per-weight prediction error sqrt(L_SR/n); the quotient
srq = ln(n/L_SR) scores how far a replicator sits above the trivial
uniform-error baseline. Both are documented calibrations chosen to
reproduce the reference operating points (see README).
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grad import _log_softmax_rows, loss_sr
from .net import forward_batch, param_count


@dataclass
class MetricsRecord:
    """One evaluation row; l_task/accuracy stay None for vanilla runs."""

    epoch: int
    l_sr: float
    margin: float
    srq: float
    l_task: Optional[float] = None
    accuracy: Optional[float] = None
    seconds: Optional[float] = None
    accepted: Optional[int] = None


def margin(l_sr, n):
    """RMS per-weight prediction error, sqrt(l_sr/n)."""
    if l_sr < 0:
        raise ValueError("l_sr must be non-negative")
    if n < 1:
        raise ValueError("n must be at least 1")
    return math.sqrt(l_sr / n)


def srq(l_sr, n):
    """Self-replicating quotient ln(n/l_sr); exact replication maps to +inf."""
    if l_sr < 0:
        raise ValueError("l_sr must be non-negative")
    if n < 1:
        raise ValueError("n must be at least 1")
    if l_sr == 0:
        return math.inf
    if math.isinf(l_sr):
        return -math.inf  # diverged-run sentinel, mirrors the exact-zero case
    return math.log(n / l_sr)


def full_loss(params, proj, spec, chunk=None):
    """Self-consistent loss: every coordinate scored against current params.

    chunk=None evaluates one batch over all coordinates, making the value
    loss_sr(params, target=params, all coords) by construction; a chunk
    size trades peak memory for a tolerance-level (1e-12) reassociation.
    """
    n = param_count(spec)
    if chunk is None:
        return loss_sr(params, proj, params, np.arange(n), spec)
    total = 0.0
    for lo in range(0, n, chunk):
        coords = np.arange(lo, min(lo + chunk, n))
        total += loss_sr(params, proj, params, coords, spec)
    return total


def record_for(params, proj, spec, epoch, **extra):
    """Assemble the standard per-epoch record from a full-loss sweep."""
    l = full_loss(params, proj, spec)
    n = param_count(spec)
    return MetricsRecord(epoch=epoch, l_sr=l, margin=margin(l, n),
                         srq=srq(l, n), **extra)


def evaluate_classifier(params, proj, spec, images, labels, tau=0.01,
                        batch=1024):
    """Summed cross-entropy and argmax accuracy over an evaluation set.

    Coordinates are paired with items cyclically (item i gets coordinate
    i mod n); argmax ties break toward the lowest class index.
    """
    images = np.asarray(images, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.intp)
    if len(images) == 0:
        raise ValueError("empty evaluation set")
    if len(images) != len(labels):
        raise ValueError("images and labels differ in length")
    n = param_count(spec)
    l_task = 0.0
    hits = 0
    for lo in range(0, len(images), batch):
        hi = min(lo + batch, len(images))
        coords = np.arange(lo, hi) % n
        cache = forward_batch(params, proj, coords, spec,
                              images=images[lo:hi], tau=tau)
        z, lse = _log_softmax_rows(cache["logits"], tau)
        l_task += float(np.sum(lse - z[np.arange(hi - lo), labels[lo:hi]]))
        hits += int(np.sum(np.argmax(cache["logits"], axis=1) == labels[lo:hi]))
    return l_task, hits / len(images)


def accuracy(params, proj, spec, test_images, test_labels):
    """Fraction of evaluation items whose argmax class matches the label."""
    return evaluate_classifier(params, proj, spec, test_images, test_labels)[1]

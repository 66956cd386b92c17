"""Losses and exact reverse-mode gradients for the quine networks.

The replication loss is a moving target: every mini-batch of an epoch
differentiates against the same frozen snapshot of the parameters, never
through it. Losses are sums (not means) over the batch so that the
per-batch losses of an epoch partition add up to the full-coordinate loss
and stay directly comparable across batch sizes.
"""

from dataclasses import dataclass

import numpy as np

from .net import forward_batch, split_params
from .numerics import selu_derivative


@dataclass
class LossBreakdown:
    """Replication + task components; l_total = l_sr + lam * l_task."""

    l_sr: float
    l_task: float
    l_total: float


def _residual(cache, target, coords):
    return cache["preds"] - np.asarray(target, dtype=np.float64)[coords]


def loss_sr(params, proj, target, coords, spec, images=None, tau=0.01):
    """Sum of squared self-prediction errors over a coordinate batch.

    ``target`` is the full-length epoch snapshot; only the batch entries
    are read. For auxiliary specs, images=None evaluates with the blank
    (all-zero) image convention.
    """
    coords = np.asarray(coords, dtype=np.intp)
    cache = forward_batch(params, proj, coords, spec, images=images, tau=tau)
    d = _residual(cache, target, coords)
    return float(d @ d)


def grad_sr(params, proj, target, coords, spec, images=None):
    """Exact gradient of loss_sr with the target held constant.

    Gradient flows through w1, w2, w_out only; the w_aux block of an
    auxiliary spec stays identically zero.
    """
    coords = np.asarray(coords, dtype=np.intp)
    cache = forward_batch(params, proj, coords, spec, images=images)
    w = split_params(params, spec)
    grad = np.zeros_like(params)
    gw = split_params(grad, spec)
    r = 2.0 * _residual(cache, target, coords)
    gw["w_out"][:] = cache["h2"].T @ r
    d_a2 = (r[:, None] * w["w_out"]) * selu_derivative(cache["a2"])
    gw["w2"][:] = d_a2.T @ cache["h1"]
    d_a1 = (d_a2 @ w["w2"]) * selu_derivative(cache["a1"])
    gw["w1"][:] = d_a1.T @ cache["h0"]
    return grad


def _log_softmax_rows(logits, tau):
    z = logits / tau
    m = z.max(axis=1)
    lse = m + np.log(np.exp(z - m[:, None]).sum(axis=1))
    return z, lse


def cross_entropy_temp(logits, label, tau):
    """-log softmax(logits/tau)[label], max-stabilized.

    With tau=0.01 the naive exponentiation overflows; the max subtraction
    is load-bearing, not cosmetic.
    """
    if tau <= 0:
        raise ValueError("tau must be positive")
    z2 = np.asarray(logits, dtype=np.float64)[None, :]
    z, lse = _log_softmax_rows(z2, tau)
    return float(lse[0] - z[0, int(label)])


def loss_aux(params, proj, target, coords, images, labels, spec,
             lam=0.01, tau=0.01):
    """Paired-batch auxiliary loss: l_sr + lam * summed cross-entropy."""
    coords = np.asarray(coords, dtype=np.intp)
    labels = np.asarray(labels, dtype=np.intp)
    if not (len(coords) == len(images) == len(labels)):
        raise ValueError("coords, images and labels must have equal length")
    cache = forward_batch(params, proj, coords, spec, images=images, tau=tau)
    d = _residual(cache, target, coords)
    l_sr = float(d @ d)
    z, lse = _log_softmax_rows(cache["logits"], tau)
    l_task = float(np.sum(lse - z[np.arange(len(labels)), labels]))
    return LossBreakdown(l_sr, l_task, l_sr + lam * l_task)


def grad_aux(params, proj, target, coords, images, labels, spec,
             lam=0.01, tau=0.01, classifier_only=False):
    """Exact gradient of loss_aux's l_total.

    w_out is driven only by the replication term, w_aux only by the task
    term, w1 and w2 by both. classifier_only drops the replication term
    entirely (the pure-MNIST baseline network); lam=0 reduces bitwise to
    grad_sr on the same batch.
    """
    coords = np.asarray(coords, dtype=np.intp)
    labels = np.asarray(labels, dtype=np.intp)
    if not (len(coords) == len(images) == len(labels)):
        raise ValueError("coords, images and labels must have equal length")
    cache = forward_batch(params, proj, coords, spec, images=images, tau=tau)
    w = split_params(params, spec)
    grad = np.zeros_like(params)
    gw = split_params(grad, spec)
    d_h2 = np.zeros_like(cache["h2"])
    if not classifier_only:
        r = 2.0 * _residual(cache, target, coords)
        gw["w_out"][:] = cache["h2"].T @ r
        d_h2 += r[:, None] * w["w_out"]
    if lam != 0.0:
        delta = cache["probs"].copy()
        delta[np.arange(len(labels)), labels] -= 1.0
        delta *= lam / tau
        gw["w_aux"][:] = delta.T @ cache["h2"]
        d_h2 += delta @ w["w_aux"]
    d_a2 = d_h2 * selu_derivative(cache["a2"])
    gw["w2"][:] = d_a2.T @ cache["h1"]
    d_a1 = (d_a2 @ w["w2"]) * selu_derivative(cache["a1"])
    gw["w1"][:] = d_a1.T @ cache["h0"]
    return grad


def finite_difference(fn, params, h=1e-5):
    """Central-difference gradient of a scalar function of the flat params.

    Test oracle, not a runtime path; O(n) evaluations of fn.
    """
    params = np.asarray(params, dtype=np.float64)
    g = np.zeros_like(params)
    for i in range(params.size):
        bumped = params.copy()
        bumped[i] = params[i] + h
        up = fn(bumped)
        bumped[i] = params[i] - h
        down = fn(bumped)
        g[i] = (up - down) / (2.0 * h)
    return g

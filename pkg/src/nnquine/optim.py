"""First-order optimizers as pure state-update steps.

Six algorithms, each frozen at the de-facto community defaults since the
comparison they back only names them: sgd(lr=0.01), momentum(lr=0.01,
rho=0.9, heavy-ball, no dampening), adam(lr=0.001, betas 0.9/0.999,
eps=1e-8, bias-corrected), adagrad(lr=0.01, eps=1e-10), adamax(lr=0.002,
same betas as adam), rmsprop(lr=0.01, alpha=0.99, eps=1e-8).

step() never mutates its inputs; trainers thread (params, state) through.
"""

from dataclasses import dataclass, field

import numpy as np

from .numerics import NumericError

DEFAULTS = {
    "sgd": {"lr": 0.01},
    "momentum": {"lr": 0.01, "rho": 0.9},
    "adam": {"lr": 0.001, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8},
    "adagrad": {"lr": 0.01, "eps": 1e-10},
    "adamax": {"lr": 0.002, "beta1": 0.9, "beta2": 0.999, "eps": 1e-8},
    "rmsprop": {"lr": 0.01, "alpha": 0.99, "eps": 1e-8},
}

ALGORITHMS = tuple(sorted(DEFAULTS))

_BUFFERS = {
    "sgd": (),
    "momentum": ("buf",),
    "adam": ("m", "v"),
    "adagrad": ("acc",),
    "adamax": ("m", "u"),
    "rmsprop": ("sq",),
}


@dataclass
class OptimizerState:
    algorithm: str
    step_count: int = 0
    buffers: dict = field(default_factory=dict)
    hyper: dict = field(default_factory=dict)


def make_optimizer(algorithm, n_params, **overrides):
    """Fresh zero-buffer state; keyword overrides patch the default table."""
    if algorithm not in DEFAULTS:
        raise ValueError("unknown optimizer %r (choose from %s)"
                         % (algorithm, ", ".join(ALGORITHMS)))
    hyper = dict(DEFAULTS[algorithm])
    for key, val in overrides.items():
        if key not in hyper:
            raise ValueError("%s has no hyperparameter %r" % (algorithm, key))
        hyper[key] = float(val)
    buffers = {name: np.zeros(n_params) for name in _BUFFERS[algorithm]}
    return OptimizerState(algorithm, 0, buffers, hyper)


def reset(state):
    """Zeroed buffers and step_count, same algorithm and hyperparameters."""
    buffers = {k: np.zeros_like(v) for k, v in state.buffers.items()}
    return OptimizerState(state.algorithm, 0, buffers, dict(state.hyper))


def step(state, params, grad):
    """One canonical update; returns (params', state'), inputs untouched."""
    grad = np.asarray(grad, dtype=np.float64)
    if not np.isfinite(grad).all():
        raise NumericError("non-finite gradient passed to %s step %d"
                           % (state.algorithm, state.step_count + 1))
    h = state.hyper
    b = state.buffers
    t = state.step_count + 1
    new = {}
    if state.algorithm == "sgd":
        params = params - h["lr"] * grad
    elif state.algorithm == "momentum":
        new["buf"] = h["rho"] * b["buf"] + grad
        params = params - h["lr"] * new["buf"]
    elif state.algorithm == "adam":
        new["m"] = h["beta1"] * b["m"] + (1.0 - h["beta1"]) * grad
        new["v"] = h["beta2"] * b["v"] + (1.0 - h["beta2"]) * grad * grad
        m_hat = new["m"] / (1.0 - h["beta1"] ** t)
        v_hat = new["v"] / (1.0 - h["beta2"] ** t)
        params = params - h["lr"] * m_hat / (np.sqrt(v_hat) + h["eps"])
    elif state.algorithm == "adagrad":
        new["acc"] = b["acc"] + grad * grad
        params = params - h["lr"] * grad / (np.sqrt(new["acc"]) + h["eps"])
    elif state.algorithm == "adamax":
        new["m"] = h["beta1"] * b["m"] + (1.0 - h["beta1"]) * grad
        new["u"] = np.maximum(h["beta2"] * b["u"], np.abs(grad))
        scale = h["lr"] / (1.0 - h["beta1"] ** t)
        params = params - scale * new["m"] / (new["u"] + h["eps"])
    else:  # rmsprop
        new["sq"] = h["alpha"] * b["sq"] + (1.0 - h["alpha"]) * grad * grad
        params = params - h["lr"] * grad / (np.sqrt(new["sq"]) + h["eps"])
    return params, OptimizerState(state.algorithm, t, new, h)

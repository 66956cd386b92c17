"""Deterministic numeric primitives shared by every other module.

Fixed-order reductions, the SeLU nonlinearity, He-style Gaussian draws,
a numerically stable softmax, and named substreams of a seeded PCG64
generator. Everything here is float64 and replays bit-identically for a
fixed numpy build.
"""

import numpy as np

# Self-normalizing network constants (Klambauer et al.), full float64 precision.
SELU_SCALE = 1.0507009873554805
SELU_ALPHA = 1.6732632423543772

# lambda*alpha, the negative saturation limit of selu and the sup of |selu'|.
SELU_SAT = SELU_SCALE * SELU_ALPHA

# Frozen substream ids. Changing any of these silently changes every run
# derived from a given seed, so they are append-only.
_PURPOSES = {"init": 1, "projection": 2, "shuffle": 3, "noise": 4, "pairing": 5}


class NumericError(ArithmeticError):
    """A computation produced non-finite values."""


def require_finite(arr, where):
    # cheap guard; `where` names the layer/tensor for the error message
    if not np.all(np.isfinite(arr)):
        raise NumericError("non-finite values in %s" % (where,))


def selu(x):
    """Elementwise SeLU: scale*x for x > 0, scale*alpha*(exp(x) - 1) otherwise.

    Accepts scalars or arrays; scalars come back as python floats. The two
    branches are combined without masking so the positive branch is exactly
    scale*x and the negative branch exactly (scale*alpha)*expm1(x).
    """
    x = np.asarray(x, dtype=np.float64)
    out = SELU_SCALE * np.maximum(x, 0.0) + SELU_SAT * np.expm1(np.minimum(x, 0.0))
    return float(out) if out.ndim == 0 else out


def selu_derivative(x):
    """d selu / dx. The x = 0 tie takes the exponential branch value scale*alpha."""
    x = np.asarray(x, dtype=np.float64)
    out = np.where(x > 0.0, SELU_SCALE, SELU_SAT * np.exp(np.minimum(x, 0.0)))
    return float(out) if out.ndim == 0 else out


def he_sample(fan_in, rng, size=None):
    """Zero-mean Gaussian draw(s) with variance 2/fan_in.

    size=None gives a single float; otherwise an array of that shape.
    """
    if fan_in < 1:
        raise ValueError("fan_in must be >= 1, got %r" % (fan_in,))
    return rng.normal(0.0, np.sqrt(2.0 / fan_in), size)


def strict_dot(a, b):
    """Inner product accumulated strictly in ascending index order."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise ValueError("strict_dot needs equal-length vectors, got %s and %s"
                         % (a.shape, b.shape))
    if a.shape[0] == 0:
        return 0.0
    # cumsum is a sequential left-to-right accumulation, bit-equal to a loop
    return float(np.cumsum(a * b)[-1])


def strict_matvec(m, v):
    """m @ v with each row reduced in ascending column order."""
    m = np.asarray(m, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if m.ndim != 2 or v.ndim != 1 or m.shape[1] != v.shape[0]:
        raise ValueError("strict_matvec shape mismatch: %s @ %s" % (m.shape, v.shape))
    if m.shape[1] == 0:
        return np.zeros(m.shape[0])
    return np.cumsum(m * v, axis=1)[:, -1]


def strict_matmul_t(h, w):
    """h @ w.T with the contraction axis accumulated in ascending order.

    Rows of the (rows_h, rows_w) result are independent; column k of both
    inputs is folded in before column k+1, matching strict_matvec exactly.
    """
    h = np.asarray(h, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if h.ndim != 2 or w.ndim != 2 or h.shape[1] != w.shape[1]:
        raise ValueError("strict_matmul_t shape mismatch: %s x %s" % (h.shape, w.shape))
    out = np.zeros((h.shape[0], w.shape[0]))
    for k in range(h.shape[1]):
        out += h[:, k, None] * w[None, :, k]
    return out


def softmax(z, axis=-1):
    """Stable softmax along `axis` (max subtraction before exponentiation)."""
    z = np.asarray(z, dtype=np.float64)
    shifted = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def substream(seed, purpose):
    """Fresh PCG64 generator for (seed, purpose); the pair replays identically.

    Draw method per distribution is numpy's (ziggurat for normals), frozen by
    the numpy dependency pin.
    """
    try:
        sid = _PURPOSES[purpose]
    except KeyError:
        raise ValueError("unknown rng purpose %r (have %s)"
                         % (purpose, sorted(_PURPOSES))) from None
    return np.random.default_rng(np.random.SeedSequence((int(seed), sid)))


class RngStreams:
    """Named independent generators derived from one master seed.

    Streams: init (weight draws), projection (fixed embeddings), shuffle
    (coordinate order), noise (hill-climb perturbations), pairing (image
    stream order). Consumers document which stream they draw from, so a run
    is a pure function of (config, seed).
    """

    def __init__(self, seed):
        self.seed = int(seed)
        self.init = substream(seed, "init")
        self.projection = substream(seed, "projection")
        self.shuffle = substream(seed, "shuffle")
        self.noise = substream(seed, "noise")
        self.pairing = substream(seed, "pairing")

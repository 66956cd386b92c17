"""Training regimes: moving-target gradient epochs, hill-climbing, and
regeneration, plus the task-augmented variant.

The moving target works like this: at the start of an epoch the current
parameters are snapshotted, the coordinates are shuffled and partitioned
into mini-batches, and every batch differentiates against that same frozen
snapshot. The full self-consistent loss is evaluated only after the epoch,
once the parameters are again their own target.

Divergence (a non-finite gradient or activation) aborts the epoch but not
the run: the last valid parameters are kept, the flag is recorded, and the
remaining epochs still produce report rows so comparison runs can be
plotted side by side.
"""

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import net, optim
from .grad import grad_aux, grad_sr, loss_sr
from .metrics import MetricsRecord, evaluate_classifier, record_for
from .numerics import NumericError, RngStreams

REGIMES = ("gradient", "hillclimb", "regenerate")


class UnsupportedRegimeError(ValueError):
    """Raised for regime/variant combinations that do not exist."""


@dataclass
class TrainConfig:
    spec: net.NetworkSpec
    seed: int = 0
    regime: str = "gradient"
    epochs: int = 30
    batch_size: int = 10
    optimizer: str = "adamax"
    opt_overrides: dict = field(default_factory=dict)
    lam: float = 0.01
    tau: float = 0.01
    sigma: float = 0.01
    generations: int = 10
    inner_epochs: int = 1
    classifier_only: bool = False
    sequential_regen: bool = False
    record_seconds: bool = False

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError("unknown regime %r" % (self.regime,))
        if self.optimizer not in optim.DEFAULTS:
            raise ValueError("unknown optimizer %r" % (self.optimizer,))
        if self.batch_size < 1:
            raise ValueError("batch_size must be at least 1")
        if self.epochs < 0 or self.inner_epochs < 0 or self.generations < 0:
            raise ValueError("epoch counts must be non-negative")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")


# EpochReport rows are plain metric records; trainers fill the optional
# fields that apply to their regime.
EpochReport = MetricsRecord


@dataclass
class RunResult:
    params: np.ndarray
    reports: list
    diverged: bool = False


@dataclass
class AuxData:
    """Train/test image sets for the task objective (MnistSet-shaped)."""

    train: object
    test: object


class ImageStream:
    """Infinite shuffled stream over the training images.

    Reshuffles every time it wraps, so an epoch of coordinate batches sees
    a fresh image order regardless of how 60,000 items divide into it.
    """

    def __init__(self, images, labels, rng):
        if len(images) == 0:
            raise ValueError("empty image stream")
        self.images = images
        self.labels = labels
        self.rng = rng
        self.order = rng.permutation(len(images))
        self.pos = 0

    def take(self, k):
        picked = []
        while k > 0:
            grab = min(k, len(self.order) - self.pos)
            picked.append(self.order[self.pos:self.pos + grab])
            self.pos += grab
            k -= grab
            if self.pos == len(self.order):
                self.order = self.rng.permutation(len(self.order))
                self.pos = 0
        idx = np.concatenate(picked)
        return self.images[idx], self.labels[idx]


def _safe_record(params, proj, spec, epoch, **extra):
    # past a divergence the full sweep itself overflows; report sentinels
    try:
        return record_for(params, proj, spec, epoch, **extra)
    except NumericError:
        return MetricsRecord(epoch=epoch, l_sr=math.inf, margin=math.inf,
                             srq=-math.inf, **extra)


def _gradient_pass(params, proj, opt_state, cfg, streams, data_stream=None):
    """All mini-batches of one epoch; returns (params', state', diverged)."""
    spec = cfg.spec
    snapshot = params.copy()
    perm = streams.shuffle.permutation(net.param_count(spec))
    for lo in range(0, perm.size, cfg.batch_size):
        coords = perm[lo:lo + cfg.batch_size]
        try:
            if data_stream is None:
                g = grad_sr(params, proj, snapshot, coords, spec)
            else:
                images, labels = data_stream.take(coords.size)
                g = grad_aux(params, proj, snapshot, coords, images, labels,
                             spec, lam=cfg.lam, tau=cfg.tau,
                             classifier_only=cfg.classifier_only)
            params, opt_state = optim.step(opt_state, params, g)
        except NumericError:
            return params, opt_state, True
    return params, opt_state, False


def train_epoch_gradient(params, proj, opt_state, cfg, streams, epoch=0):
    params, opt_state, diverged = _gradient_pass(params, proj, opt_state,
                                                 cfg, streams)
    report = _safe_record(params, proj, cfg.spec, epoch)
    return params, opt_state, report, diverged


def train_epoch_aux(params, proj, opt_state, cfg, data, stream, streams,
                    epoch=0):
    params, opt_state, diverged = _gradient_pass(params, proj, opt_state,
                                                 cfg, streams,
                                                 data_stream=stream)
    l_task, acc = _classifier_eval(params, proj, cfg, data)
    report = _safe_record(params, proj, cfg.spec, epoch,
                          l_task=l_task, accuracy=acc)
    return params, opt_state, report, diverged


def _classifier_eval(params, proj, cfg, data):
    try:
        return evaluate_classifier(params, proj, cfg.spec, data.test.images,
                                   data.test.labels, tau=cfg.tau)
    except NumericError:
        return math.inf, 0.0


def train_epoch_hillclimb(params, proj, cfg, streams, epoch=0):
    """Propose a full-vector Gaussian perturbation per mini-batch; keep it
    only if the batch loss against the epoch snapshot strictly decreases."""
    spec = cfg.spec
    n = net.param_count(spec)
    snapshot = params.copy()
    perm = streams.shuffle.permutation(n)
    accepted = 0
    for lo in range(0, n, cfg.batch_size):
        coords = perm[lo:lo + cfg.batch_size]
        noise = streams.noise.normal(0.0, cfg.sigma, n)
        incumbent = loss_sr(params, proj, snapshot, coords, spec)
        proposal = params + noise
        try:
            challenger = loss_sr(proposal, proj, snapshot, coords, spec)
        except NumericError:
            continue
        if challenger < incumbent:
            params = proposal
            accepted += 1
    report = _safe_record(params, proj, spec, epoch, accepted=accepted)
    return params, report


def regenerate(params, proj, spec, sequential=False):
    """Replace every parameter with the network's prediction of it.

    Synchronous semantics by default: all predictions are computed from the
    pre-sweep parameters, so the result is independent of sweep order. The
    sequential variant (write back coordinate by ascending coordinate as it
    goes) exists only for comparison experiments.
    """
    if spec.variant != net.VANILLA:
        raise UnsupportedRegimeError(
            "regeneration is unsupported for the auxiliary quine")
    if not sequential:
        return net.predict_all(params, proj, spec)
    params = params.copy()
    for c in range(net.param_count(spec)):
        params[c] = net.forward_vanilla(params, proj, c, spec)[0]
    return params


def run_regeneration(params, proj, cfg, streams):
    """G generations of (T gradient epochs, then one regeneration sweep)."""
    spec = cfg.spec
    if spec.variant != net.VANILLA:
        raise UnsupportedRegimeError(
            "regeneration is unsupported for the auxiliary quine")
    if cfg.generations < 1:
        raise ValueError("generations must be at least 1")
    opt_state = optim.make_optimizer(cfg.optimizer, net.param_count(spec),
                                     **cfg.opt_overrides)
    reports = []
    diverged = False
    for gen in range(1, cfg.generations + 1):
        t0 = time.perf_counter()
        for _ in range(cfg.inner_epochs):
            params, opt_state, bad = _gradient_pass(params, proj, opt_state,
                                                    cfg, streams)
            diverged = diverged or bad
        try:
            params = regenerate(params, proj, spec,
                                sequential=cfg.sequential_regen)
        except NumericError:
            diverged = True
            reports.append(_safe_record(params, proj, spec, gen))
            break
        report = _safe_record(params, proj, spec, gen)
        if cfg.record_seconds:
            report.seconds = time.perf_counter() - t0
        reports.append(report)
    return RunResult(params=params, reports=reports, diverged=diverged)


def run_training(cfg, data=None, start=None):
    """Orchestrate a full run of cfg.regime from a fresh or resumed state.

    Emits one report per epoch (or generation); an epochs=0 run emits just
    the initial evaluation row. `data` carries the train/test image sets
    and is required exactly when the spec is auxiliary.
    """
    spec = cfg.spec
    streams = RngStreams(cfg.seed)
    proj = net.build_projections(spec, cfg.seed)
    if start is not None:
        params = np.array(start, dtype=np.float64)
        if params.shape != (net.param_count(spec),):
            raise ValueError("resume parameters do not match the spec")
    else:
        params = net.init_params(spec, streams.init)

    if cfg.regime == "regenerate":
        return run_regeneration(params, proj, cfg, streams)

    aux = spec.variant == net.AUXILIARY
    stream = None
    if aux:
        if cfg.regime != "gradient":
            raise UnsupportedRegimeError(
                "auxiliary specs train only in the gradient regime")
        if data is None:
            raise ValueError("auxiliary training requires a dataset")
        if data.train.images.shape[1] != spec.image_dim:
            raise ValueError("dataset image size %d does not match spec (%d)"
                             % (data.train.images.shape[1], spec.image_dim))
        if int(data.train.labels.max()) >= spec.n_classes:
            raise ValueError("label outside the spec's class range")
        stream = ImageStream(data.train.images, data.train.labels,
                             streams.pairing)

    reports = []
    diverged = False
    if cfg.epochs == 0:
        if aux:
            l_task, acc = _classifier_eval(params, proj, cfg, data)
            reports.append(_safe_record(params, proj, spec, 0,
                                        l_task=l_task, accuracy=acc))
        elif cfg.regime == "hillclimb":
            reports.append(_safe_record(params, proj, spec, 0, accepted=0))
        else:
            reports.append(_safe_record(params, proj, spec, 0))
        return RunResult(params=params, reports=reports, diverged=False)

    opt_state = None
    if cfg.regime == "gradient":
        opt_state = optim.make_optimizer(cfg.optimizer,
                                         net.param_count(spec),
                                         **cfg.opt_overrides)
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        if cfg.regime == "hillclimb":
            params, report = train_epoch_hillclimb(params, proj, cfg,
                                                   streams, epoch=epoch)
        elif aux:
            params, opt_state, report, bad = train_epoch_aux(
                params, proj, opt_state, cfg, data, stream, streams,
                epoch=epoch)
            diverged = diverged or bad
        else:
            params, opt_state, report, bad = train_epoch_gradient(
                params, proj, opt_state, cfg, streams, epoch=epoch)
            diverged = diverged or bad
        if cfg.record_seconds:
            report.seconds = time.perf_counter() - t0
        reports.append(report)
    return RunResult(params=params, reports=reports, diverged=diverged)

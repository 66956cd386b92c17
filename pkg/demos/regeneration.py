"""Regeneration: feed the quine its own predictions and repeat.

Act one replaces every weight with the network's prediction of it, with
no training at all. From the shipped initialization the output head is
zero, so the very first sweep lands exactly on the zero quine -- the
trivial self-replicator -- and stays there.

Act two interleaves one Adamax epoch before each of ten sweeps. That is
enough to keep the network away from the trivial fixpoint: the loss
lands around one, orders of magnitude below where training alone gets
in ten epochs, and the weights stay visibly nonzero.
"""

import numpy as np

from nnquine import metrics, net, train
from nnquine.numerics import RngStreams

SEED = 0


def main():
    spec = net.NetworkSpec.vanilla()
    proj = net.build_projections(spec, SEED)
    params = net.init_params(spec, RngStreams(SEED).init)
    print("act one: pure regeneration (no training)")
    for sweep in range(1, 4):
        params = train.regenerate(params, proj, spec)
        print("  sweep %d: max|w| = %g, full loss = %g"
              % (sweep, np.max(np.abs(params)),
                 metrics.full_loss(params, proj, spec)))
    print("  the zero quine replicates itself exactly, but it encodes "
          "nothing\n")

    print("act two: one training epoch before each sweep (G=10, T=1)")
    cfg = train.TrainConfig(spec=spec, seed=SEED, regime="regenerate",
                            generations=10, inner_epochs=1,
                            optimizer="adamax")
    result = train.run_training(cfg)
    for r in result.reports:
        print("  generation %2d: full loss %7.3f  srq %.2f"
              % (r.epoch, r.l_sr, r.srq))
    last = result.reports[-1]
    print("a nontrivial quine: loss %.3f, max|w| %.3f, %d nonzero weights"
          % (last.l_sr, np.max(np.abs(result.params)),
             int(np.count_nonzero(result.params))))


if __name__ == "__main__":
    main()

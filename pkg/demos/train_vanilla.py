"""Train a vanilla quine and watch it learn to predict its own weights.

The default network holds 20,100 parameters and is asked, coordinate by
coordinate, to output each one of them. Thirty epochs of Adamax (about a
minute) cut the full self-replication loss roughly in half; --epochs 100
reaches a third of the starting value.
"""

import argparse

from nnquine import metrics, net, train


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--epochs", type=int, default=30)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    spec = net.NetworkSpec.vanilla()
    cfg = train.TrainConfig(spec=spec, seed=args.seed, epochs=args.epochs,
                            optimizer="adamax")
    print("training the %d-parameter vanilla quine, %d epochs of adamax"
          % (net.param_count(spec), args.epochs))
    result = train.run_training(cfg)
    for r in result.reports:
        if r.epoch % 5 == 0 or r.epoch in (1, args.epochs):
            print("epoch %3d  loss %8.3f  margin %.4f  srq %.3f"
                  % (r.epoch, r.l_sr, r.margin, r.srq))
    last = result.reports[-1]
    print("final: on average each weight is predicted to within %.4f "
          "of its true value" % last.margin)


if __name__ == "__main__":
    main()

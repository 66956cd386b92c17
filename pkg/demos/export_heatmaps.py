"""Train briefly, then render weights and self-predictions as PGM images.

Everything goes through the command-line surface: a short training run
writes out/final.ckpt, and the export command turns each weight matrix
and the network's prediction of it into a log-scaled grayscale image.
After training the two images of a layer start to rhyme; for an exact
quine they would be identical.
"""

import os
import tempfile

from nnquine import cli


def main():
    workdir = tempfile.mkdtemp(prefix="nnquine-demo-")
    run = os.path.join(workdir, "run")
    assert cli.main(["train", "--epochs", "10", "--seed", "0",
                     "--out", run]) == 0
    assert cli.main(["export", os.path.join(run, "final.ckpt"), "both",
                     "--out", workdir]) == 0
    assert cli.main(["eval", os.path.join(run, "final.ckpt")]) == 0
    print("images under %s:" % workdir)
    for name in sorted(os.listdir(workdir)):
        if name.endswith(".pgm"):
            print("  %s" % name)


if __name__ == "__main__":
    main()

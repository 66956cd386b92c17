"""Command line entry point.

Every run command resolves its configuration in three layers (built-in
defaults, then a JSON config file, then explicit flags), echoes the fully
resolved result to <out>/config.json, and writes a metrics CSV plus a
final checkpoint. Exit codes: 0 success, 1 usage or config error, 2 run
completed but diverged.
"""

import argparse
import json
import math
import os
import sys

import numpy as np

from . import dataio, metrics, net, optim, train
from .numerics import NumericError

ENV_OUTDIR = "NNQUINE_OUTDIR"

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}

_RUN_COMMANDS = ("train", "hillclimb", "regenerate", "train-aux")


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on usage errors; 2 means "diverged" here, so
    # remap every usage problem to exit code 1
    def error(self, message):
        self.exit(1, "%s: error: %s\n" % (self.prog, message))


def _defaults(command):
    base = {
        "out": None, "seed": 0, "batch_size": 10, "optimizer": "adamax",
        "record_seconds": False, "opt_overrides": {}, "init_checkpoint": None,
        "embed_dim": 100, "hidden_dim": 100, "encoding": net.ONE_HOT,
    }
    if command == "train":
        base.update(epochs=30)
    elif command == "hillclimb":
        base.update(epochs=30, sigma=0.01)
    elif command == "regenerate":
        base.update(generations=10, inner_epochs=1, sequential_regen=False)
    elif command == "train-aux":
        base.update(epochs=30, lam=0.01, tau=0.01, classifier_only=False,
                    mnist_dir=None, coord_embed_dim=50, image_dim=784,
                    n_classes=10)
    return base


def _add_run_flags(sp, epochs=True):
    sp.add_argument("--config", default=None, help="JSON config file")
    sp.add_argument("--out", default=None,
                    help="output directory (or $%s)" % ENV_OUTDIR)
    sp.add_argument("--seed", type=int, default=None)
    sp.add_argument("--batch-size", dest="batch_size", type=int, default=None)
    sp.add_argument("--optimizer", choices=optim.ALGORITHMS, default=None)
    sp.add_argument("--lr", type=float, default=None,
                    help="override the optimizer's learning rate")
    sp.add_argument("--embed-dim", dest="embed_dim", type=int, default=None)
    sp.add_argument("--hidden-dim", dest="hidden_dim", type=int, default=None)
    sp.add_argument("--encoding", choices=(net.ONE_HOT, net.SCALAR),
                    default=None)
    sp.add_argument("--record-seconds", dest="record_seconds",
                    action="store_true", default=None)
    sp.add_argument("--init-checkpoint", dest="init_checkpoint", default=None,
                    help="resume from a saved checkpoint")
    if epochs:
        sp.add_argument("--epochs", type=int, default=None)


def build_parser():
    parser = _Parser(prog="nnquine",
                     description="self-replicating neural network runs")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("train", help="gradient-regime vanilla quine")
    _add_run_flags(sp)

    sp = sub.add_parser("hillclimb", help="perturb-and-keep training")
    _add_run_flags(sp)
    sp.add_argument("--sigma", type=float, default=None)

    sp = sub.add_parser("regenerate", help="generations of train+regenerate")
    _add_run_flags(sp, epochs=False)
    sp.add_argument("--generations", type=int, default=None)
    sp.add_argument("--inner-epochs", dest="inner_epochs", type=int,
                    default=None)
    sp.add_argument("--sequential", dest="sequential_regen",
                    action="store_true", default=None)

    sp = sub.add_parser("train-aux", help="quine that also classifies images")
    _add_run_flags(sp)
    sp.add_argument("--mnist-dir", dest="mnist_dir", default=None)
    sp.add_argument("--lambda", dest="lam", type=float, default=None)
    sp.add_argument("--temperature", dest="tau", type=float, default=None)
    sp.add_argument("--classifier-only", dest="classifier_only",
                    action="store_true", default=None)
    sp.add_argument("--coord-embed-dim", dest="coord_embed_dim", type=int,
                    default=None)
    sp.add_argument("--image-dim", dest="image_dim", type=int, default=None)
    sp.add_argument("--n-classes", dest="n_classes", type=int, default=None)

    sp = sub.add_parser("export", help="dump weight/prediction heatmaps")
    sp.add_argument("checkpoint")
    sp.add_argument("what", choices=("weights", "predictions", "both"))
    sp.add_argument("--layer", default="all",
                    choices=("w1", "w2", "w_out", "w_aux", "all"))
    sp.add_argument("--out", default=".")

    sp = sub.add_parser("eval", help="print metrics of a checkpoint")
    sp.add_argument("checkpoint")
    sp.add_argument("--mnist-dir", dest="mnist_dir", default=None)
    return parser


class ConfigError(ValueError):
    pass


def resolve_config(args):
    """defaults < JSON config file < explicit flags."""
    resolved = _defaults(args.command)
    if args.config is not None:
        try:
            with open(args.config) as fh:
                loaded = json.load(fh)
        except OSError as exc:
            raise ConfigError("cannot read config: %s" % exc)
        except json.JSONDecodeError as exc:
            raise ConfigError("config is not valid JSON: %s" % exc)
        if not isinstance(loaded, dict):
            raise ConfigError("config must be a JSON object")
        for key, value in loaded.items():
            if key == "command":
                if value != args.command:
                    raise ConfigError(
                        "config was echoed by %r, not %r" % (value, args.command))
                continue
            if key not in resolved:
                raise ConfigError("unknown config key %r" % key)
            resolved[key] = value
    for key in resolved:
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
    if args.lr is not None:
        overrides = dict(resolved["opt_overrides"])
        overrides["lr"] = args.lr
        resolved["opt_overrides"] = overrides
    if resolved["out"] is None:
        resolved["out"] = os.environ.get(ENV_OUTDIR)
    if not resolved["out"]:
        raise ConfigError("no output directory (--out or $%s)" % ENV_OUTDIR)
    return resolved


def _build_spec(cfg, command):
    if command == "train-aux":
        return net.NetworkSpec.auxiliary(
            embed_dim=cfg["embed_dim"], hidden_dim=cfg["hidden_dim"],
            coord_embed_dim=cfg["coord_embed_dim"],
            image_dim=cfg["image_dim"], n_classes=cfg["n_classes"],
            encoding=cfg["encoding"])
    return net.NetworkSpec.vanilla(embed_dim=cfg["embed_dim"],
                                   hidden_dim=cfg["hidden_dim"],
                                   encoding=cfg["encoding"])


def find_mnist(directory):
    """Locate the four official IDX files (plain or .gz) in a directory."""
    paths = {}
    for key, stem in MNIST_FILES.items():
        for candidate in (stem, stem + ".gz"):
            full = os.path.join(directory, candidate)
            if os.path.exists(full):
                paths[key] = full
                break
        else:
            raise ConfigError("missing %s(.gz) in %s" % (stem, directory))
    return paths


def _load_dataset(cfg):
    if not cfg["mnist_dir"]:
        raise ConfigError("train-aux requires --mnist-dir")
    paths = find_mnist(cfg["mnist_dir"])
    return train.AuxData(
        train=dataio.load_mnist(paths["train_images"], paths["train_labels"],
                                split="train"),
        test=dataio.load_mnist(paths["test_images"], paths["test_labels"],
                               split="test"))


def _echo_config(cfg, command, out_dir):
    echo = dict(cfg)
    echo["command"] = command
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        json.dump(echo, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _run(args):
    cfg = resolve_config(args)
    spec = _build_spec(cfg, args.command)
    regime = {"train": "gradient", "hillclimb": "hillclimb",
              "regenerate": "regenerate", "train-aux": "gradient"}[args.command]
    tc_kwargs = dict(spec=spec, seed=cfg["seed"], regime=regime,
                     batch_size=cfg["batch_size"], optimizer=cfg["optimizer"],
                     opt_overrides=cfg["opt_overrides"],
                     record_seconds=cfg["record_seconds"])
    if args.command != "regenerate":
        tc_kwargs["epochs"] = cfg["epochs"]
    else:
        tc_kwargs.update(generations=cfg["generations"],
                         inner_epochs=cfg["inner_epochs"],
                         sequential_regen=cfg["sequential_regen"])
    if args.command == "hillclimb":
        tc_kwargs["sigma"] = cfg["sigma"]
    if args.command == "train-aux":
        tc_kwargs.update(lam=cfg["lam"], tau=cfg["tau"],
                         classifier_only=cfg["classifier_only"])
    config = train.TrainConfig(**tc_kwargs)

    data = _load_dataset(cfg) if args.command == "train-aux" else None

    start = None
    if cfg["init_checkpoint"]:
        ck_spec, ck_seed, _, start = dataio.load_checkpoint(cfg["init_checkpoint"])
        if ck_spec != spec:
            raise ConfigError("checkpoint spec does not match this run")
        if ck_seed != cfg["seed"]:
            # different seed means different projections: the loaded params
            # would describe some other network entirely
            raise ConfigError("checkpoint was built with seed %d; rerun with"
                              " --seed %d" % (ck_seed, ck_seed))

    out_dir = cfg["out"]
    os.makedirs(out_dir, exist_ok=True)
    _echo_config(cfg, args.command, out_dir)

    result = train.run_training(config, data=data, start=start)

    csv_path = os.path.join(out_dir, "metrics.csv")
    if os.path.exists(csv_path):
        os.remove(csv_path)
    for report in result.reports:
        dataio.append_metrics_csv(csv_path, report)
    epochs_run = cfg.get("epochs", cfg.get("generations", 0))
    dataio.save_checkpoint(os.path.join(out_dir, "final.ckpt"), spec,
                           cfg["seed"], epochs_run, result.params)
    last = result.reports[-1]
    print("final l_sr %.12g margin %.12g srq %s%s"
          % (last.l_sr, last.margin, _fmt_srq(last.srq),
             " [diverged]" if result.diverged else ""))
    return 2 if result.diverged else 0


def _fmt_srq(value):
    if math.isinf(value):
        return "+inf" if value > 0 else "-inf"
    return "%.12g" % value


def _export(args):
    spec, seed, _, params = dataio.load_checkpoint(args.checkpoint)
    proj = net.build_projections(spec, seed)
    shapes = dict(net.layer_shapes(spec))
    if args.layer != "all" and args.layer not in shapes:
        raise ConfigError("spec has no layer %r" % args.layer)
    layers = list(shapes) if args.layer == "all" else [args.layer]
    sources = {}
    if args.what in ("weights", "both"):
        sources["weights"] = params
    if args.what in ("predictions", "both"):
        sources["predictions"] = net.predict_all(params, proj, spec)
    os.makedirs(args.out, exist_ok=True)
    for kind, vector in sources.items():
        blocks = net.split_params(vector, spec)
        for layer in layers:
            path = os.path.join(args.out, "%s_%s.pgm" % (layer, kind))
            dataio.export_heatmap(blocks[layer].reshape(shapes[layer]), path)
            print("wrote %s" % path)
    return 0


def _eval(args):
    spec, seed, _, params = dataio.load_checkpoint(args.checkpoint)
    proj = net.build_projections(spec, seed)
    l = metrics.full_loss(params, proj, spec)
    n = net.param_count(spec)
    print("l_sr %.12g" % l)
    print("margin %.12g" % metrics.margin(l, n))
    print("srq %s" % _fmt_srq(metrics.srq(l, n)))
    if spec.variant == net.AUXILIARY and args.mnist_dir:
        paths = find_mnist(args.mnist_dir)
        test = dataio.load_mnist(paths["test_images"], paths["test_labels"])
        acc = metrics.accuracy(params, proj, spec, test.images, test.labels)
        print("accuracy %.12g" % acc)
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command in _RUN_COMMANDS:
            return _run(args)
        if args.command == "export":
            return _export(args)
        return _eval(args)
    except (ConfigError, ValueError, OSError, EOFError) as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 1
    except NumericError as exc:
        print("numeric failure: %s" % exc, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

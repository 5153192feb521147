"""kfbi-train command line."""

from __future__ import annotations

import argparse
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import formats
from .model import LoadedModel, evaluate
from .train import TrainConfig, TrainingError, train


def synthetic_dataset(M: int, P: int, n: int, seed: int) -> formats.Dataset:
    """phi = (I + 0.1 p_0 S + ...) g with fixed random S: linear in g, smooth in p."""
    rng = np.random.default_rng(seed)
    shifts = [0.1 * rng.standard_normal((M, M)) / np.sqrt(M) for _ in range(P)]
    params = rng.uniform(-1, 1, (n, P))
    g = rng.standard_normal((n, M))
    phi = np.empty_like(g)
    for i in range(n):
        A = np.eye(M) + sum(params[i, k] * shifts[k] for k in range(P))
        phi[i] = A @ g[i]
    names = [f"p{k}" for k in range(P)]
    return formats.Dataset(M, names, params, g, phi, [f"synthetic {i}" for i in range(n)], [("source", "synthetic")])


def cmd_train(args) -> int:
    cfg = TrainConfig(**{f.name: getattr(args, f.name) for f in fields(TrainConfig)})
    r = train(cfg)
    print(f"epochs={r.epochs} final_loss={r.final_loss:.6e} heldout_rel_rms={r.heldout_rel_rms:.6e} "
          f"superposition={r.superposition:.3e}")
    return 0


def cmd_export(args) -> int:
    w = formats.read_weights(args.weights)
    out = LoadedModel(w).export()
    out.metadata = w.metadata
    formats.write_weights(args.out, out)
    return 0


def cmd_infer(args) -> int:
    w = formats.read_weights(args.weights)
    g = np.array([float(t) for t in args.input.split()])
    p = np.array([float(t) for t in args.params.split()]) if args.params else np.zeros(0)
    y = evaluate(LoadedModel(w), p[None, :], g[None, :])[0]
    print(" ".join(formats.fmt(v) for v in y))
    return 0


def cmd_fixtures(args) -> int:
    """Small deterministic artifacts for cross-component tests."""
    d = Path(args.dir)
    d.mkdir(parents=True, exist_ok=True)
    formats.write_dataset(d / "param_small.kfbid", synthetic_dataset(16, 2, 64, 11))
    train(TrainConfig(str(d / "param_small.kfbid"), str(d / "param_small.kfbiw"), str(d / "param_small.kfbig"),
                      str(d / "param_small.jsonl"), features=8, channels=2, side=4, d=2, epochs=args.epochs,
                      log_every=50))
    formats.write_dataset(d / "linear_small.kfbid", synthetic_dataset(16, 0, 48, 12))
    train(TrainConfig(str(d / "linear_small.kfbid"), str(d / "linear_small.kfbiw"), str(d / "linear_small.kfbig"),
                      str(d / "linear_small.jsonl"), epochs=args.epochs, log_every=50))
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="kfbi-train", description=__doc__)
    sub = ap.add_subparsers(dest="cmd", required=True)

    t = sub.add_parser("train", help="train on a KFBID1 dataset, write KFBIW1 + golden vectors + JSON-lines log")
    t.add_argument("dataset")
    t.add_argument("--out", required=True)
    defaults = TrainConfig("", "")
    for f in fields(TrainConfig):
        if f.name in ("dataset", "out"):
            continue
        t.add_argument("--" + f.name.replace("_", "-"), dest=f.name, type=type(getattr(defaults, f.name)),
                       default=getattr(defaults, f.name))
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("export", help="re-export a weights file without retraining")
    e.add_argument("weights")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_export)

    i = sub.add_parser("infer", help="evaluate a weights file on one input")
    i.add_argument("weights")
    i.add_argument("input", help="whitespace-separated numbers")
    i.add_argument("--params", default="")
    i.set_defaults(func=cmd_infer)

    x = sub.add_parser("fixtures", help="write small deterministic cross-component test artifacts")
    x.add_argument("dir")
    x.add_argument("--epochs", type=int, default=400)
    x.set_defaults(func=cmd_fixtures)

    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (formats.FormatError, TrainingError, ValueError) as err:
        print(f"kfbi-train: {err}", file=sys.stderr)
        return 2
    except FileNotFoundError as err:
        print(f"kfbi-train: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    raise SystemExit(main())

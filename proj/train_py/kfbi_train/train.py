"""Adam training of operator models on KFBID1 data."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import formats
from .model import LinearModel, ModelConfig, ParamModel, evaluate, superposition_error


class TrainingError(RuntimeError):
    pass


@dataclass
class TrainConfig:
    dataset: str
    out: str
    golden: str = ""               # default <out>.kfbig
    log: str = ""                  # default <out>.jsonl
    model: str = "auto"            # auto | param | linear
    features: int = 16
    activation: str = "tanh"
    channels: int = 4
    side: int = 8
    d: int = 1
    lr: float = 1e-3
    lr_factor: float = 0.6
    patience: int = 1500
    min_lr: float = 1e-7           # stop once the scheduler drives the rate below this
    epochs: int = 50000
    test_fraction: float = 0.2
    seed: int = 1
    log_every: int = 100
    golden_pairs: int = 10

    def meta(self) -> list[tuple[str, str]]:
        return [(k, str(v)) for k, v in asdict(self).items() if k not in ("dataset", "out", "golden", "log")]


@dataclass
class TrainResult:
    weights: formats.Weights
    final_loss: float
    heldout_rel_rms: float
    superposition: float
    epochs: int
    losses: list[float] = field(default_factory=list)


def split(n: int, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 <= test_fraction < 1.0:
        raise ValueError("test_fraction must be in [0, 1)")
    order = np.random.default_rng(seed).permutation(n)
    n_test = int(round(test_fraction * n))
    return np.sort(order[n_test:]), np.sort(order[:n_test])


def build_model(cfg: TrainConfig, ds: formats.Dataset) -> torch.nn.Module:
    kind = cfg.model if cfg.model != "auto" else ("param" if ds.P > 0 else "linear")
    if kind == "param":
        if ds.P == 0:
            raise TrainingError("param model needs a dataset with parameter columns")
        return ParamModel(ModelConfig(ds.M, ds.P, cfg.features, cfg.activation, cfg.channels, cfg.side, cfg.d))
    if kind == "linear":
        return LinearModel(ds.M)
    raise TrainingError(f"unknown model kind '{cfg.model}'")


def moving_average_nonincreasing(losses, window: int = 1000, slack: float = 1e-9) -> bool:
    """Means over consecutive non-overlapping windows never increase."""
    means = [float(np.mean(losses[i:i + window])) for i in range(0, len(losses) - window + 1, window)]
    return all(b <= a * (1 + slack) + 1e-300 for a, b in zip(means, means[1:]))


def train(cfg: TrainConfig) -> TrainResult:
    torch.manual_seed(cfg.seed)
    torch.use_deterministic_algorithms(True)
    ds = formats.read_dataset(cfg.dataset)
    if len(ds) == 0:
        raise TrainingError(f"{cfg.dataset}: empty dataset")
    tr, te = split(len(ds), cfg.test_fraction, cfg.seed)
    model = build_model(cfg, ds).double()

    P = torch.from_numpy(ds.params[tr])
    G = torch.from_numpy(ds.g[tr])
    T = torch.from_numpy(ds.phi[tr])
    opt = torch.optim.Adam(model.parameters(), lr=cfg.lr)
    sched = torch.optim.lr_scheduler.ReduceLROnPlateau(opt, factor=cfg.lr_factor, patience=cfg.patience)

    log_path = Path(cfg.log or cfg.out + ".jsonl")
    log_path.parent.mkdir(parents=True, exist_ok=True)
    losses = []
    last_good = {k: v.clone() for k, v in model.state_dict().items()}
    with log_path.open("w") as log:
        epoch = 0
        for epoch in range(1, cfg.epochs + 1):
            opt.zero_grad()
            loss = ((model(P, G) - T) ** 2).sum()
            value = loss.item()
            if not math.isfinite(value):
                model.load_state_dict(last_good)
                _write(cfg, model, ds, te)
                raise TrainingError(f"loss became {value} at epoch {epoch}; last good weights written to {cfg.out}")
            last_good = {k: v.clone() for k, v in model.state_dict().items()}
            losses.append(value)
            loss.backward()
            opt.step()
            sched.step(value)
            lr = opt.param_groups[0]["lr"]
            if epoch % cfg.log_every == 0 or epoch == 1:
                log.write(json.dumps({"epoch": epoch, "loss": value, "lr": lr}) + "\n")
            if value == 0.0 or lr < cfg.min_lr:
                break
        result = _write(cfg, model, ds, te)
        result.epochs = epoch
        result.final_loss = losses[-1]
        result.losses = losses
        log.write(json.dumps({"epoch": epoch, "final_loss": result.final_loss,
                              "heldout_rel_rms": result.heldout_rel_rms,
                              "superposition": result.superposition}) + "\n")
    if result.superposition > 1e-6:
        raise TrainingError(f"trained model violates superposition ({result.superposition:.3e})")
    return result


def heldout_rel_rms(model, ds: formats.Dataset, idx: np.ndarray) -> float:
    if len(idx) == 0:
        return 0.0
    pred = evaluate(model, ds.params[idx], ds.g[idx])
    ref = ds.phi[idx]
    return float(np.sqrt(np.sum((pred - ref) ** 2) / max(np.sum(ref ** 2), 1e-300)))


def golden_set(model, ds: formats.Dataset, idx: np.ndarray, count: int, seed: int) -> formats.Golden:
    """Random inputs; parameters drawn from held-out records (or all records)."""
    rng = np.random.default_rng(seed + 7919)
    pool = idx if len(idx) else np.arange(len(ds))
    pick = pool[rng.integers(0, len(pool), count)]
    params = ds.params[pick]
    inputs = rng.standard_normal((count, ds.M))
    outputs = evaluate(model, params, inputs)
    return formats.Golden(ds.M, ds.P, list(params), list(inputs), list(outputs))


def _write(cfg: TrainConfig, model, ds: formats.Dataset, te: np.ndarray) -> TrainResult:
    w = model.export()
    w.metadata = cfg.meta()
    formats.write_weights(cfg.out, w)
    formats.write_golden(cfg.golden or cfg.out + ".kfbig", golden_set(model, ds, te, cfg.golden_pairs, cfg.seed))
    params = ds.params[te] if len(te) else ds.params[:1]
    sup = superposition_error(model, params, ds.M, cfg.seed)
    return TrainResult(w, float("nan"), heldout_rel_rms(model, ds, te), sup, 0)

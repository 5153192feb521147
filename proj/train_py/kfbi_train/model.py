"""Operator models: the parameterized conv + elementwise-product network and a
plain bias-free linear map. Both are linear in g for fixed parameters."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from .formats import LayerSpec, Weights

_ACT = {
    "identity": nn.Identity,
    "relu": nn.ReLU,
    "tanh": nn.Tanh,
    "sigmoid": nn.Sigmoid,
    "softplus": nn.Softplus,
    "silu": nn.SiLU,
    "gelu": nn.GELU,
}


@dataclass
class ModelConfig:
    M: int
    P: int
    features: int = 16       # preprocess width
    activation: str = "tanh"
    channels: int = 4
    side: int = 8            # branch_a grid is side x side before upsampling
    d: int = 1               # head bottleneck divisor

    def check(self) -> None:
        if self.M <= 0 or self.P <= 0:
            raise ValueError("model: M and P must be positive")
        if self.activation not in _ACT:
            raise ValueError(f"model: unknown activation '{self.activation}'")
        if self.d <= 0 or self.M % self.d:
            raise ValueError("model: d must divide M")


class Reshape(nn.Module):
    def __init__(self, shape):
        super().__init__()
        self.shape = tuple(shape)

    def forward(self, x):
        return x.reshape(x.shape[0], *self.shape)


class ParamModel(nn.Module):
    """pre = preprocess(p); I1 = branch_a(pre); I2 = branch_b(g); phi = head(I1 * I2)."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        cfg.check()
        self.cfg = cfg
        act = _ACT[cfg.activation]
        c, s, M = cfg.channels, cfg.side, cfg.M
        self.preprocess = nn.Sequential(nn.Linear(cfg.P, cfg.features), act())
        self.branch_a = nn.Sequential(
            nn.Linear(cfg.features, s * s), act(), Reshape((1, s, s)),
            nn.Conv2d(1, c, 3, padding=1), act(),
            nn.ConvTranspose2d(c, c, 4, stride=2, padding=1), act(),
            nn.Conv2d(c, 1, 3, padding=1), nn.Flatten(),
            nn.Linear(4 * s * s, M))
        self.branch_b = nn.Sequential(nn.Linear(M, M, bias=False))
        if cfg.d == 1:
            self.head = nn.Sequential(nn.Linear(M, M, bias=False))
        else:
            k = M // cfg.d
            self.head = nn.Sequential(nn.Linear(M, k, bias=False), nn.Linear(k, M, bias=False))

    def forward(self, p, g):
        return self.head(self.branch_a(self.preprocess(p)) * self.branch_b(g))

    def export(self) -> Weights:
        layers = []
        for name in ("preprocess", "branch_a", "branch_b", "head"):
            layers += _export_section(name, getattr(self, name))
        return Weights("param", self.cfg.M, P=self.cfg.P, layers=layers)


class LinearModel(nn.Module):
    def __init__(self, M: int):
        super().__init__()
        self.M = M
        self.W = nn.Linear(M, M, bias=False)

    def forward(self, p, g):
        return self.W(g)

    def export(self) -> Weights:
        return Weights("linear-direct", self.M, matrices=[_np(self.W.weight)])


def _np(t: torch.Tensor) -> np.ndarray:
    return t.detach().to(torch.float64).cpu().numpy().copy()


def _export_section(section: str, seq: nn.Sequential) -> list[LayerSpec]:
    out = []
    for m in seq:
        bias = _np(m.bias) if getattr(m, "bias", None) is not None else None
        if isinstance(m, nn.Linear):
            out.append(LayerSpec(section, "dense", m.in_features, m.out_features, bias=bias, weight=_np(m.weight)))
        elif isinstance(m, nn.Conv2d):
            _check_conv(m)
            out.append(LayerSpec(section, "conv2d", m.in_channels, m.out_channels, *m.kernel_size,
                                 stride=m.stride[0], padding=m.padding[0], bias=bias, weight=_np(m.weight)))
        elif isinstance(m, nn.ConvTranspose2d):
            _check_conv(m)
            out.append(LayerSpec(section, "conv_transpose2d", m.in_channels, m.out_channels, *m.kernel_size,
                                 stride=m.stride[0], padding=m.padding[0], output_padding=m.output_padding[0],
                                 bias=bias, weight=_np(m.weight)))
        elif isinstance(m, Reshape):
            out.append(LayerSpec(section, "reshape", shape=m.shape))
        elif isinstance(m, nn.Flatten):
            out.append(LayerSpec(section, "flatten"))
        else:
            name = next((k for k, v in _ACT.items() if isinstance(m, v)), None)
            if name is None:
                raise ValueError(f"export: unsupported module {type(m).__name__}")
            out.append(LayerSpec(section, "activation", activation=name))
    return out


def _check_conv(m) -> None:
    if (m.stride[0] != m.stride[1] or m.padding[0] != m.padding[1] or m.dilation != (1, 1) or m.groups != 1
            or (hasattr(m, "output_padding") and m.output_padding[0] != m.output_padding[1])):
        raise ValueError("export: only square stride/padding, no dilation or groups")


def _module_for(l: LayerSpec) -> nn.Module:
    if l.type == "dense":
        m = nn.Linear(l.in_, l.out, bias=l.bias is not None)
    elif l.type == "conv2d":
        m = nn.Conv2d(l.in_, l.out, (l.kh, l.kw), stride=l.stride, padding=l.padding, bias=l.bias is not None)
    elif l.type == "conv_transpose2d":
        m = nn.ConvTranspose2d(l.in_, l.out, (l.kh, l.kw), stride=l.stride, padding=l.padding,
                               output_padding=l.output_padding, bias=l.bias is not None)
    elif l.type == "activation":
        return _ACT[l.activation]()
    elif l.type == "reshape":
        return Reshape(l.shape)
    else:
        return nn.Flatten()
    with torch.no_grad():
        m.weight.copy_(torch.from_numpy(l.weight))
        if l.bias is not None:
            m.bias.copy_(torch.from_numpy(l.bias))
    return m


class LoadedModel(nn.Module):
    """Torch mirror of a KFBIW1 file, for evaluating or re-exporting weights."""

    def __init__(self, w: Weights):
        super().__init__()
        self.kind, self.M, self.P = w.kind, w.M, w.P
        if w.kind == "param":
            for name in ("preprocess", "branch_a", "branch_b", "head"):
                setattr(self, name, nn.Sequential(*[_module_for(l) for l in w.layers if l.section == name]))
        else:
            self.mats = nn.ParameterList([nn.Parameter(torch.from_numpy(m)) for m in w.matrices])
            self.d = w.d
        self.double()

    def forward(self, p, g):
        if self.kind == "param":
            return self.head(self.branch_a(self.preprocess(p)) * self.branch_b(g))
        x = g
        for m in self.mats:  # phi = C B A g
            x = x @ m.T
        return x

    def export(self) -> Weights:
        if self.kind != "param":
            return Weights(self.kind, self.M, d=self.d, matrices=[_np(m) for m in self.mats])
        layers = []
        for name in ("preprocess", "branch_a", "branch_b", "head"):
            layers += _export_section(name, getattr(self, name))
        return Weights("param", self.M, P=self.P, layers=layers)


def _rows(params, n: int) -> np.ndarray:
    p = np.asarray(params, dtype=np.float64)
    return np.zeros((n, 0)) if p.size == 0 else p.reshape(n, -1)


def evaluate(model: nn.Module, params: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Float64 forward pass on row-stacked inputs."""
    model = model.double()
    with torch.no_grad():
        p = torch.from_numpy(_rows(params, len(g)))
        out = model(p, torch.from_numpy(np.asarray(g, dtype=np.float64)))
    return out.numpy()


def superposition_error(model: nn.Module, params: np.ndarray, M: int, seed: int = 0) -> float:
    """max relative deviation from a f(u) + b f(v) = f(a u + b v) at fixed params."""
    rng = np.random.default_rng(seed)
    p = _rows(params, len(params))
    u = rng.standard_normal((len(p), M))
    v = rng.standard_normal((len(p), M))
    a, b = 1.7, -0.6
    lhs = evaluate(model, p, a * u + b * v)
    rhs = a * evaluate(model, p, u) + b * evaluate(model, p, v)
    return float(np.max(np.abs(lhs - rhs)) / max(np.max(np.abs(rhs)), 1e-300))

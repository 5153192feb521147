"""Readers and writers for the KFBID1, KFBIW1 and KFBIG1 files."""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

END_HEADER = b"end_header\n"
SECTIONS = ("preprocess", "branch_a", "branch_b", "head")
ACTIVATIONS = ("identity", "relu", "tanh", "sigmoid", "softplus", "silu", "gelu")


class FormatError(ValueError):
    pass


# ---- container --------------------------------------------------------------


def parse_header(text: str, source: str) -> list[tuple[str, str]]:
    entries = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise FormatError(f"{source}:{lineno}: expected 'key = value', got '{line}'")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise FormatError(f"{source}:{lineno}: empty key")
        entries.append((key, value.strip()))
    return entries


def read_container(path, magic: str) -> tuple[list[tuple[str, str]], bytes]:
    data = Path(path).read_bytes()
    nl = data.find(b"\n")
    if nl < 0 or data[:nl] != magic.encode():
        raise FormatError(f"{path}: bad magic (expected {magic})")
    end = data.find(END_HEADER, nl + 1)
    if end < 0:
        raise FormatError(f"{path}: truncated header (no end_header)")
    header = parse_header(data[nl + 1:end].decode(), str(path))
    return header, data[end + len(END_HEADER):]


def write_container(path, magic: str, header: list[tuple[str, str]], payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = "".join(f"{k} = {v}\n" for k, v in header)
    path.write_bytes(magic.encode() + b"\n" + text.encode() + END_HEADER + payload)


def header_get(header, key, default=None):
    vals = [v for k, v in header if k == key]
    if not vals:
        if default is None:
            raise FormatError(f"missing key '{key}'")
        return default
    return vals[-1]


class _Reader:
    def __init__(self, payload: bytes, source: str):
        self.buf = memoryview(payload)
        self.pos = 0
        self.source = source

    def _need(self, n: int) -> None:
        if len(self.buf) - self.pos < n:
            raise FormatError(f"{self.source}: truncated payload (need {n} more bytes, "
                              f"have {len(self.buf) - self.pos})")

    def f64(self, n: int) -> np.ndarray:
        self._need(8 * n)
        out = np.frombuffer(self.buf, dtype="<f8", count=n, offset=self.pos).astype(np.float64)
        self.pos += 8 * n
        return out

    def u32(self) -> int:
        self._need(4)
        (v,) = struct.unpack_from("<I", self.buf, self.pos)
        self.pos += 4
        return v

    def raw(self, n: int) -> bytes:
        self._need(n)
        out = bytes(self.buf[self.pos:self.pos + n])
        self.pos += n
        return out

    def done(self) -> None:
        left = len(self.buf) - self.pos
        if left:
            raise FormatError(f"{self.source}: {left} trailing payload bytes")


def _f64_bytes(a) -> bytes:
    return np.ascontiguousarray(a, dtype="<f8").tobytes()


def fmt(v: float) -> str:
    return repr(float(v))


# ---- KFBID1 -----------------------------------------------------------------


@dataclass
class Dataset:
    M: int
    param_names: list[str] = field(default_factory=list)
    params: np.ndarray = None  # (n, P)
    g: np.ndarray = None       # (n, M)
    phi: np.ndarray = None     # (n, M)
    provenance: list[str] = field(default_factory=list)
    info: list[tuple[str, str]] = field(default_factory=list)

    @property
    def P(self) -> int:
        return len(self.param_names)

    def __len__(self) -> int:
        return len(self.provenance)


_DATASET_KEYS = {"M", "P", "param_names", "count", "byte_order", "element", "record_layout"}


def read_dataset(path) -> Dataset:
    header, payload = read_container(path, "KFBID1")
    info = []
    for k, v in header:
        if k.startswith("info."):
            info.append((k[5:], v))
        elif k not in _DATASET_KEYS:
            raise FormatError(f"{path}: unknown key '{k}'")
    if header_get(header, "byte_order", "little") != "little" or header_get(header, "element", "float64") != "float64":
        raise FormatError(f"{path}: only little-endian float64 datasets are supported")
    M = int(header_get(header, "M"))
    P = int(header_get(header, "P"))
    names = header_get(header, "param_names").split() if P > 0 else []
    if len(names) != P or M <= 0:
        raise FormatError(f"{path}: bad M, P or param_names")
    n = int(header_get(header, "count"))
    r = _Reader(payload, str(path))
    params = np.zeros((n, P))
    g = np.zeros((n, M))
    phi = np.zeros((n, M))
    prov = []
    for i in range(n):
        params[i] = r.f64(P)
        g[i] = r.f64(M)
        phi[i] = r.f64(M)
        prov.append(r.raw(r.u32()).decode())
    r.done()
    return Dataset(M, names, params, g, phi, prov, info)


def write_dataset(path, ds: Dataset) -> None:
    n = len(ds)
    header = [("M", str(ds.M)), ("P", str(ds.P))]
    if ds.P:
        header.append(("param_names", " ".join(ds.param_names)))
    header += [("count", str(n)), ("byte_order", "little"), ("element", "float64"),
               ("record_layout", "params g phi provenance")]
    header += [("info." + k, v) for k, v in ds.info]
    parts = []
    for i in range(n):
        p = ds.params[i] if ds.P else np.zeros(0)
        if len(p) != ds.P or len(ds.g[i]) != ds.M or len(ds.phi[i]) != ds.M:
            raise FormatError(f"write_dataset: record {i} has inconsistent lengths")
        text = ds.provenance[i].encode()
        parts += [_f64_bytes(p), _f64_bytes(ds.g[i]), _f64_bytes(ds.phi[i]), struct.pack("<I", len(text)), text]
    write_container(path, "KFBID1", header, b"".join(parts))


# ---- KFBIW1 -----------------------------------------------------------------


@dataclass
class LayerSpec:
    """One exported layer. Weight layouts follow PyTorch: dense (out, in),
    conv2d (out_c, in_c, kh, kw), conv_transpose2d (in_c, out_c, kh, kw)."""
    section: str
    type: str
    in_: int = 0
    out: int = 0
    kh: int = 0
    kw: int = 0
    stride: int = 1
    padding: int = 0
    output_padding: int = 0
    bias: np.ndarray | None = None
    weight: np.ndarray | None = None
    activation: str = ""
    shape: tuple[int, int, int] = ()

    def line(self) -> str:
        s = f"{self.section} {self.type}"
        b = " bias" if self.bias is not None else " nobias"
        if self.type == "dense":
            return s + f" {self.in_} {self.out}" + b
        if self.type == "conv2d":
            return s + f" {self.in_} {self.out} {self.kh} {self.kw} {self.stride} {self.padding}" + b
        if self.type == "conv_transpose2d":
            return (s + f" {self.in_} {self.out} {self.kh} {self.kw} {self.stride} {self.padding} "
                    f"{self.output_padding}" + b)
        if self.type == "activation":
            return s + f" {self.activation}"
        if self.type == "reshape":
            return s + " " + " ".join(str(d) for d in self.shape)
        if self.type == "flatten":
            return s
        raise FormatError(f"unknown layer type '{self.type}'")

    def weight_shape(self) -> tuple[int, ...]:
        if self.type == "dense":
            return (self.out, self.in_)
        if self.type == "conv2d":
            return (self.out, self.in_, self.kh, self.kw)
        if self.type == "conv_transpose2d":
            return (self.in_, self.out, self.kh, self.kw)
        return ()


def _parse_layer(value: str, where: str) -> LayerSpec:
    tok = value.split()
    if len(tok) < 2 or tok[0] not in SECTIONS:
        raise FormatError(f"{where}: expected '<section> <type> ...'")
    sec, typ, rest = tok[0], tok[1], tok[2:]
    sizes = {"dense": 3, "conv2d": 7, "conv_transpose2d": 8, "activation": 1, "reshape": 3, "flatten": 0}
    if typ not in sizes:
        raise FormatError(f"{where}: unknown layer type '{typ}'")
    if len(rest) != sizes[typ]:
        raise FormatError(f"{where}: {typ} layer expects {sizes[typ]} fields, got {len(rest)}")
    l = LayerSpec(sec, typ)
    if typ == "activation":
        if rest[0] not in ACTIVATIONS:
            raise FormatError(f"{where}: unknown activation '{rest[0]}'")
        l.activation = rest[0]
        return l
    if typ == "reshape":
        l.shape = tuple(int(t) for t in rest)
        return l
    if typ == "flatten":
        return l
    ints = [int(t) for t in rest[:-1]]
    if rest[-1] not in ("bias", "nobias"):
        raise FormatError(f"{where}: expected 'bias' or 'nobias', got '{rest[-1]}'")
    l.in_, l.out, *conv = ints
    if typ != "dense":
        l.kh, l.kw, l.stride, l.padding = conv[:4]
        if typ == "conv_transpose2d":
            l.output_padding = conv[4]
    l.bias = np.zeros(l.out) if rest[-1] == "bias" else None
    return l


@dataclass
class Weights:
    kind: str  # linear-direct | linear-bottleneck | param
    M: int
    P: int = 0
    d: int = 1
    matrices: list[np.ndarray] = field(default_factory=list)  # linear: [W] or [A, B, C]
    layers: list[LayerSpec] = field(default_factory=list)     # param
    metadata: list[tuple[str, str]] = field(default_factory=list)

    def parameter_count(self) -> int:
        if self.kind != "param":
            return sum(m.size for m in self.matrices)
        return sum((l.weight.size if l.weight is not None else 0) + (l.bias.size if l.bias is not None else 0)
                   for l in self.layers)


def write_weights(path, w: Weights) -> None:
    header = [("kind", w.kind), ("M", str(w.M)), ("byte_order", "little"), ("element", "float64")]
    parts = []
    if w.kind == "linear-bottleneck":
        header.append(("d", str(w.d)))
    if w.kind == "param":
        header.append(("P", str(w.P)))
    header.append(("parameters", str(w.parameter_count())))
    if w.kind == "param":
        order = {s: i for i, s in enumerate(SECTIONS)}
        layers = sorted(w.layers, key=lambda l: order[l.section])  # stable: keeps in-section order
        for l in layers:
            header.append(("layer", l.line()))
            if l.weight_shape():
                if tuple(l.weight.shape) != l.weight_shape():
                    raise FormatError(f"{l.section} {l.type}: weight shape {l.weight.shape}, "
                                      f"expected {l.weight_shape()}")
                parts.append(_f64_bytes(l.weight))
            if l.bias is not None:
                if l.bias.shape != (l.out,):
                    raise FormatError(f"{l.section} {l.type}: bias shape {l.bias.shape}")
                parts.append(_f64_bytes(l.bias))
    else:
        parts += [_f64_bytes(m) for m in w.matrices]
    header += [("meta." + k, v) for k, v in w.metadata]
    write_container(path, "KFBIW1", header, b"".join(parts))


def read_weights(path) -> Weights:
    header, payload = read_container(path, "KFBIW1")
    r = _Reader(payload, str(path))
    kind = header_get(header, "kind")
    M = int(header_get(header, "M"))
    meta = [(k[5:], v) for k, v in header if k.startswith("meta.")]
    w = Weights(kind, M, metadata=meta)
    if kind == "linear-direct":
        w.matrices = [r.f64(M * M).reshape(M, M)]
    elif kind == "linear-bottleneck":
        w.d = int(header_get(header, "d"))
        k = M // w.d
        w.matrices = [r.f64(k * M).reshape(k, M), r.f64(k * k).reshape(k, k), r.f64(M * k).reshape(M, k)]
    elif kind == "param":
        w.P = int(header_get(header, "P"))
        for i, (key, value) in enumerate(header):
            if key != "layer":
                continue
            l = _parse_layer(value, f"{path}: layer {i}")
            shape = l.weight_shape()
            if shape:
                l.weight = r.f64(int(np.prod(shape))).reshape(shape)
            if l.bias is not None:
                l.bias = r.f64(l.out)
            w.layers.append(l)
    else:
        raise FormatError(f"{path}: unknown model kind '{kind}'")
    r.done()
    return w


# ---- KFBIG1 -----------------------------------------------------------------


@dataclass
class Golden:
    M: int
    P: int
    params: list[np.ndarray]
    inputs: list[np.ndarray]
    outputs: list[np.ndarray]


def write_golden(path, g: Golden) -> None:
    lines = ["KFBIG1", f"M = {g.M}", f"P = {g.P}", f"count = {len(g.inputs)}"]
    for i in range(len(g.inputs)):
        if g.P:
            lines.append("params = " + " ".join(fmt(v) for v in g.params[i]))
        lines.append("input = " + " ".join(fmt(v) for v in g.inputs[i]))
        lines.append("output = " + " ".join(fmt(v) for v in g.outputs[i]))
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text("\n".join(lines) + "\n")


def read_golden(path) -> Golden:
    text = Path(path).read_text()
    first, _, rest = text.partition("\n")
    if first.strip() != "KFBIG1":
        raise FormatError(f"{path}: bad magic (expected KFBIG1)")
    header = parse_header(rest, str(path))
    M, P, n = int(header_get(header, "M")), int(header_get(header, "P", "0")), int(header_get(header, "count"))

    def column(key):
        return [np.array([float(t) for t in v.split()]) for k, v in header if k == key]

    g = Golden(M, P, column("params") if P else [np.zeros(0)] * n, column("input"), column("output"))
    if len(g.inputs) != n or len(g.outputs) != n or len(g.params) != n:
        raise FormatError(f"{path}: expected {n} golden pairs")
    return g

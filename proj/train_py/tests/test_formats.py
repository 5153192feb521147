import os
import shutil
import subprocess
from pathlib import Path

import numpy as np
import pytest

from kfbi_train import formats
from kfbi_train.cli import main, synthetic_dataset
from kfbi_train.model import LoadedModel, ModelConfig, ParamModel, evaluate

KFBI = os.environ.get("KFBI_BIN") or shutil.which("kfbi")
needs_kfbi = pytest.mark.skipif(not KFBI, reason="kfbi binary not available (set KFBI_BIN)")


def test_dataset_round_trip(tmp_path):
    ds = synthetic_dataset(8, 2, 5, 3)
    formats.write_dataset(tmp_path / "a.kfbid", ds)
    back = formats.read_dataset(tmp_path / "a.kfbid")
    assert back.M == 8 and back.param_names == ["p0", "p1"]
    assert np.array_equal(back.params, ds.params)
    assert np.array_equal(back.g, ds.g) and np.array_equal(back.phi, ds.phi)
    assert back.provenance == ds.provenance and back.info == ds.info
    formats.write_dataset(tmp_path / "b.kfbid", back)
    assert (tmp_path / "a.kfbid").read_bytes() == (tmp_path / "b.kfbid").read_bytes()


def test_dataset_layout_by_hand(tmp_path):
    ds = formats.Dataset(2, [], np.zeros((1, 0)), np.array([[1.0, 2.0]]), np.array([[3.0, 4.0]]), ["ab"])
    formats.write_dataset(tmp_path / "d.kfbid", ds)
    raw = (tmp_path / "d.kfbid").read_bytes()
    head, payload = raw.split(b"end_header\n", 1)
    assert head.startswith(b"KFBID1\nM = 2\nP = 0\ncount = 1\n")
    assert payload == np.array([1.0, 2.0, 3.0, 4.0], "<f8").tobytes() + b"\x02\x00\x00\x00ab"


def test_corrupt_dataset_rejected(tmp_path):
    formats.write_dataset(tmp_path / "d.kfbid", synthetic_dataset(4, 0, 2, 1))
    raw = (tmp_path / "d.kfbid").read_bytes()
    (tmp_path / "short.kfbid").write_bytes(raw[:-3])
    (tmp_path / "long.kfbid").write_bytes(raw + b"zz")
    (tmp_path / "magic.kfbid").write_bytes(b"KFBIX1" + raw[6:])
    for name in ("short", "long", "magic"):
        with pytest.raises(formats.FormatError):
            formats.read_dataset(tmp_path / f"{name}.kfbid")


def _param_model(seed=0):
    import torch
    torch.manual_seed(seed)
    return ParamModel(ModelConfig(M=12, P=3, features=5, channels=2, side=4, d=3)).double()


def test_weights_round_trip_is_bit_exact(tmp_path):
    w = _param_model().export()
    formats.write_weights(tmp_path / "a.kfbiw", w)
    back = formats.read_weights(tmp_path / "a.kfbiw")
    assert [l.line() for l in back.layers] == [l.line() for l in w.layers]
    for a, b in zip(w.layers, back.layers):
        if a.weight is not None:
            assert np.array_equal(a.weight, b.weight)
    assert main(["export", str(tmp_path / "a.kfbiw"), "--out", str(tmp_path / "b.kfbiw")]) == 0
    assert (tmp_path / "a.kfbiw").read_bytes() == (tmp_path / "b.kfbiw").read_bytes()


def test_loaded_model_matches_original():
    m = _param_model(3)
    rng = np.random.default_rng(0)
    p, g = rng.standard_normal((4, 3)), rng.standard_normal((4, 12))
    assert np.array_equal(evaluate(LoadedModel(m.export()), p, g), evaluate(m, p, g))


def test_weight_shape_mismatch_aborts(tmp_path):
    w = _param_model().export()
    w.layers[0].weight = w.layers[0].weight[:, :1]
    with pytest.raises(formats.FormatError):
        formats.write_weights(tmp_path / "bad.kfbiw", w)


def test_golden_round_trip(tmp_path):
    g = formats.Golden(2, 1, [np.array([0.5])], [np.array([1.0, 1 / 3])], [np.array([-2.0, 1e-300])])
    formats.write_golden(tmp_path / "g.kfbig", g)
    back = formats.read_golden(tmp_path / "g.kfbig")
    assert np.array_equal(back.inputs[0], g.inputs[0]) and np.array_equal(back.outputs[0], g.outputs[0])


@needs_kfbi
def test_primary_reads_python_artifacts(tmp_path):
    m = _param_model(5)
    w = m.export()
    formats.write_weights(tmp_path / "m.kfbiw", w)
    rng = np.random.default_rng(1)
    p, g = rng.standard_normal((10, 3)), rng.standard_normal((10, 12))
    formats.write_golden(tmp_path / "m.kfbig", formats.Golden(12, 3, list(p), list(g), list(evaluate(m, p, g))))
    out = subprocess.run([KFBI, "verify-golden", tmp_path / "m.kfbiw", tmp_path / "m.kfbig", "--tol", "1e-10"],
                         capture_output=True, text=True)
    assert out.returncode == 0, out.stdout + out.stderr

    # Single inference agrees to 1e-12.
    res = subprocess.run([KFBI, "infer", tmp_path / "m.kfbiw", " ".join(map(formats.fmt, g[0])),
                          "--params", " ".join(map(formats.fmt, p[0]))], capture_output=True, text=True, check=True)
    got = np.array([float(t) for t in res.stdout.split()])
    assert np.max(np.abs(got - evaluate(m, p[:1], g[:1])[0])) <= 1e-12


@needs_kfbi
def test_python_reads_primary_artifacts(tmp_path):
    cfg = tmp_path / "small.cfg"
    cfg.write_text("kind = ellipse\nra = 0.8\nrb = 0.6\nbox = -1.2 1.2 -1.2 1.2\ngrid = 64 64\nM = 32\n"
                   "records = 40\nfamilies = harmonic pole\nseed = 3\n")
    subprocess.run([KFBI, "--out-dir", tmp_path, "datagen", cfg], check=True, capture_output=True)
    ds = formats.read_dataset(tmp_path / "small.kfbid")
    assert ds.M == 32 and len(ds) > 30
    formats.write_dataset(tmp_path / "again.kfbid", ds)
    assert (tmp_path / "again.kfbid").read_bytes() == (tmp_path / "small.kfbid").read_bytes()

    subprocess.run([KFBI, "--out-dir", tmp_path, "train-linear", tmp_path / "small.kfbid", "--ridge", "1e-8"],
                   check=True, capture_output=True)
    w = formats.read_weights(tmp_path / "small.kfbiw")
    assert w.kind == "linear-direct" and w.matrices[0].shape == (32, 32)
    res = subprocess.run([KFBI, "infer", tmp_path / "small.kfbiw", " ".join(map(formats.fmt, ds.g[0]))],
                         capture_output=True, text=True, check=True)
    got = np.array([float(t) for t in res.stdout.split()])
    assert np.max(np.abs(got - w.matrices[0] @ ds.g[0])) <= 1e-12 * np.max(np.abs(got))

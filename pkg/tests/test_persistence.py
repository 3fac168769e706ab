import io
import struct
from dataclasses import replace

import numpy as np
import pytest

from rulnet.network import ModelArchitecture, init_params
from rulnet.numerics import seeded_rng
from rulnet.persistence import (FORMAT_VERSION, MAGIC, Checkpoint, CheckpointError,
                                load_checkpoint, save_checkpoint, to_bytes)
from rulnet.preprocess import NormalizationStats


def make_ckpt(ablate=False):
    arch = replace(ModelArchitecture(), ablate_feature_mlp=ablate)
    rng = seeded_rng(4)
    stats = NormalizationStats(rng.random(24) - 1.0, rng.random(24) + 1.0)
    return Checkpoint(arch, init_params(arch, rng), stats, "abc123")


def test_round_trip_bit_exact(tmp_path):
    ckpt = make_ckpt()
    path = tmp_path / "m.rulm"
    save_checkpoint(ckpt, path)
    back = load_checkpoint(path)
    assert back.architecture == ckpt.architecture
    assert back.normalization == ckpt.normalization
    assert back.train_config_digest == "abc123"
    for name, arr in ckpt.params.items():
        assert back.params[name].tobytes() == arr.tobytes()


def test_layout_header():
    blob = to_bytes(make_ckpt())
    assert blob[:4] == MAGIC
    version, header_len = struct.unpack_from("<II", blob, 4)
    assert version == FORMAT_VERSION
    n_values = sum(int(np.prod(s)) for s in ModelArchitecture().param_shapes().values())
    assert len(blob) == 12 + header_len + 8 * n_values


def test_stream_destination():
    buf = io.BytesIO()
    save_checkpoint(make_ckpt(), buf)
    buf.seek(0)
    assert load_checkpoint(buf).architecture == ModelArchitecture()


def test_ablated_has_no_feature_tensors():
    back = load_checkpoint(to_bytes(make_ckpt(ablate=True)))
    assert back.architecture.ablate_feature_mlp
    assert not any(k.startswith("feat.") for k in back.params)


def test_bad_magic():
    blob = bytearray(to_bytes(make_ckpt()))
    blob[:4] = b"XXXX"
    with pytest.raises(CheckpointError, match="not a checkpoint"):
        load_checkpoint(bytes(blob))


def test_newer_version_rejected():
    blob = bytearray(to_bytes(make_ckpt()))
    struct.pack_into("<I", blob, 4, FORMAT_VERSION + 1)
    with pytest.raises(CheckpointError, match="newer than supported"):
        load_checkpoint(bytes(blob))


def test_truncated_payload():
    blob = to_bytes(make_ckpt())
    with pytest.raises(CheckpointError, match="truncated payload"):
        load_checkpoint(blob[:-5])


def test_shape_mismatch_on_save():
    ckpt = make_ckpt()
    ckpt.params["lstm.Wh"] = np.zeros((3, 3))
    with pytest.raises(CheckpointError, match="shape mismatch"):
        to_bytes(ckpt)


def test_unknown_tensor_rejected():
    ckpt = make_ckpt()
    ckpt.params["extra.W"] = np.zeros(2)
    with pytest.raises(CheckpointError, match="unknown tensor"):
        to_bytes(ckpt)

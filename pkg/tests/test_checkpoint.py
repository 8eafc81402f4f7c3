import struct
import zlib

import numpy as np
import pytest

from hr_sentinel.estimator import (
    CheckpointError,
    EstimatorConfig,
    init_model,
    load_model,
    save_model,
)
from hr_sentinel.estimator.checkpoint import model_to_bytes


@pytest.fixture
def saved(tmp_path):
    model = init_model(EstimatorConfig(seed=11, padding="same", dense_units=(8, 4, 1)))
    model.metadata.update(epochs_run=17, best_validation_loss=3.25)
    path = tmp_path / "m.bin"
    save_model(model, path)
    return model, path


def test_roundtrip_bit_exact(saved):
    model, path = saved
    back = load_model(path)
    assert back.config == model.config
    assert back.metadata == {"epochs_run": 17, "best_validation_loss": 3.25}
    assert list(back.params) == list(model.params)
    for n in model.params:
        assert back.params[n].dtype == np.float32
        assert back.params[n].tobytes() == model.params[n].tobytes()
    assert model_to_bytes(back) == path.read_bytes()


def test_roundtrip_predictions_identical(saved):
    model, path = saved
    x = np.random.default_rng(0).uniform(40, 180, (100, 10))
    np.testing.assert_array_equal(load_model(path).predict_raw(x), model.predict_raw(x))


@pytest.mark.parametrize("cut", [1, 4, 100])
def test_truncated(saved, cut):
    _, path = saved
    path.write_bytes(path.read_bytes()[:-cut])
    with pytest.raises(CheckpointError):
        load_model(path)


def test_tiny_file(tmp_path):
    (tmp_path / "m.bin").write_bytes(b"HRMOD")
    with pytest.raises(CheckpointError, match="too short"):
        load_model(tmp_path / "m.bin")


def test_bad_magic(saved):
    _, path = saved
    raw = bytearray(path.read_bytes())
    raw[:8] = b"NOTAMODL"
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError, match="magic"):
        load_model(path)


def _rewrap(body: bytes) -> bytes:
    return body + struct.pack("<I", zlib.crc32(body))


def test_version_mismatch(saved):
    _, path = saved
    body = bytearray(path.read_bytes()[:-4])
    body[8:10] = struct.pack("<H", 99)
    path.write_bytes(_rewrap(bytes(body)))
    with pytest.raises(CheckpointError, match="version"):
        load_model(path)


def test_bit_flip_detected(saved):
    _, path = saved
    raw = bytearray(path.read_bytes())
    raw[-20] ^= 0x01
    path.write_bytes(bytes(raw))
    with pytest.raises(CheckpointError, match="checksum"):
        load_model(path)


def test_shape_inconsistency(saved):
    _, path = saved
    # valid checksum, but four weight bytes short of what the config implies
    path.write_bytes(_rewrap(path.read_bytes()[:-8]))
    with pytest.raises(CheckpointError, match="weight block"):
        load_model(path)


def test_unknown_config_key(saved):
    _, path = saved
    raw = path.read_bytes()[:-4]
    magic, version, n = struct.unpack_from("<8sHI", raw)
    text = raw[14 : 14 + n] + b"bogus=1\n"
    body = struct.pack("<8sHI", magic, version, len(text)) + text + raw[14 + n :]
    path.write_bytes(_rewrap(body))
    with pytest.raises(CheckpointError, match="bogus"):
        load_model(path)

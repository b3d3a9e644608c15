"""Tests for the TRCK container and checkpoint sets."""

import struct

import pytest
import torch

from trajguard.constants import CONTAINER_MAGIC, MANIFEST_NAME, TaskKind
from trajguard.exceptions import (
    BadMagicError,
    CheckpointError,
    CheckpointShapeError,
    MissingCheckpointError,
    TruncatedCheckpointError,
    VersionMismatchError,
)
from trajguard.nn.params import init_params, params_equal
from trajguard.nn.spec import build_model_spec
from trajguard.storage.checkpoints import CheckpointSet, checkpoint_path, load_checkpoint, save_checkpoint
from trajguard.storage.container import decode_container, encode_container, read_container
from trajguard.storage.serialization import CanonicalJSON


@pytest.fixture
def spec():
    return build_model_spec("mlp:4", (3,), 2, TaskKind.CLASSIFICATION)


class TestContainer:
    """Test container encoding."""

    def test_layout(self):
        """Magic, version, descriptor, epoch, count, then one tensor."""
        data = encode_container("desc", 7, {"w": torch.tensor([[1.0, 2.0]])})
        assert data[:4] == CONTAINER_MAGIC
        assert struct.unpack("<I", data[4:8])[0] == 1
        assert struct.unpack("<I", data[8:12])[0] == 4
        assert data[12:16] == b"desc"
        assert struct.unpack("<II", data[16:24]) == (7, 1)
        assert data[-8:] == struct.pack("<ff", 1.0, 2.0)

    def test_decode_preserves_order_and_values(self):
        tensors = {"b": torch.arange(6.0).reshape(2, 3), "a": torch.tensor(3.5)}
        container = decode_container(encode_container("x", 1, tensors))
        assert list(container.tensors) == ["b", "a"]
        assert torch.equal(container.tensors["b"], tensors["b"])
        assert container.tensors["a"].shape == ()

    def test_bad_magic(self):
        with pytest.raises(BadMagicError):
            decode_container(b"NOPE" + bytes(20))

    def test_version_mismatch(self):
        data = bytearray(encode_container("x", 1, {}))
        data[4:8] = struct.pack("<I", 2)
        with pytest.raises(VersionMismatchError):
            decode_container(bytes(data))

    def test_truncated(self):
        data = encode_container("x", 1, {"w": torch.zeros(4)})
        with pytest.raises(TruncatedCheckpointError):
            decode_container(data[:-3])

    def test_trailing_bytes(self):
        data = encode_container("x", 1, {"w": torch.zeros(4)})
        with pytest.raises(CheckpointError):
            decode_container(data + b"\x00")

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            read_container(tmp_path / "absent.trck")


class TestCheckpoints:
    """Test per-epoch checkpoint files and sets."""

    def test_round_trip_is_bitwise(self, tmp_path, spec):
        params = init_params(spec, seed=1)
        path = save_checkpoint(tmp_path / "c.trck", spec, params, 3)
        loaded, meta = load_checkpoint(path)
        assert meta.epoch == 3
        assert meta.spec == spec
        assert params_equal(loaded, params)

    def test_spec_mismatch(self, tmp_path, spec):
        path = save_checkpoint(tmp_path / "c.trck", spec, init_params(spec), 1)
        other = build_model_spec("mlp:5", (3,), 2, TaskKind.CLASSIFICATION)
        with pytest.raises(CheckpointShapeError):
            load_checkpoint(path, other)

    def test_set_requires_contiguous_epochs(self, spec):
        with pytest.raises(MissingCheckpointError) as info:
            CheckpointSet(spec=spec, snapshots={1: init_params(spec), 3: init_params(spec)}, target_index=3)
        assert info.value.epoch == 2

    def test_im_epochs_skip_target(self, spec):
        snapshots = {k: init_params(spec, seed=k) for k in range(1, 5)}
        checkpoints = CheckpointSet(spec=spec, snapshots=snapshots, target_index=2)
        assert checkpoints.im_epochs == [1, 3, 4]
        assert checkpoints.with_target(4).im_epochs == [1, 2, 3]

    def test_save_load_set(self, tmp_path, spec):
        snapshots = {k: init_params(spec, seed=k) for k in range(1, 4)}
        checkpoints = CheckpointSet(spec=spec, snapshots=snapshots, target_index=3, train_loss=[0.9, 0.5, 0.3])
        checkpoints.save(tmp_path)
        manifest = CanonicalJSON.read(tmp_path / MANIFEST_NAME)
        assert manifest["files"] == ["ckpt_0001.trck", "ckpt_0002.trck", "ckpt_0003.trck"]

        loaded = CheckpointSet.load(tmp_path)
        assert loaded.epochs == 3
        assert loaded.train_loss == [0.9, 0.5, 0.3]
        for k in range(1, 4):
            assert params_equal(loaded.params_for(k), snapshots[k])

    def test_load_missing_epoch(self, tmp_path, spec):
        snapshots = {k: init_params(spec, seed=k) for k in range(1, 4)}
        CheckpointSet(spec=spec, snapshots=snapshots, target_index=3).save(tmp_path)
        checkpoint_path(tmp_path, 2).unlink()
        with pytest.raises(MissingCheckpointError):
            CheckpointSet.load(tmp_path)

    def test_load_without_manifest(self, tmp_path):
        with pytest.raises(CheckpointError):
            CheckpointSet.load(tmp_path)


class TestCanonicalJSON:
    """Test canonical JSON bytes."""

    def test_sorted_and_stable(self):
        a = CanonicalJSON.dumps({"b": 1, "a": [1.5, 2]})
        b = CanonicalJSON.dumps({"a": [1.5, 2], "b": 1})
        assert a == b
        assert a.startswith(b'{\n  "a"')
        assert a.endswith(b"\n")

    def test_float_round_trip(self):
        value = 0.1 + 0.2
        assert CanonicalJSON.loads(CanonicalJSON.dumps({"v": value}))["v"] == value

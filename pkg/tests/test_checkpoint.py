"""Tests for the binary checkpoint format."""

import json
import struct

import numpy as np
import pytest

from src.checkpoint import MAGIC, load_model, read_checkpoint, save_checkpoint
from src.errors import CheckpointError
from src.models import create_model
from src.scenes import estimate_spatial_shift_kernels


@pytest.fixture
def ssas(vocabulary, small_config):
    return create_model("ssas", vocabulary, small_config, seed=4)


class TestCheckpointRoundTrip:
    """Tests for saving and restoring models."""

    def test_bit_exact(self, tmp_path, ssas, vocabulary, small_config):
        """Test every restored array equals the saved one exactly."""
        path = save_checkpoint(tmp_path / "m.ckpt", ssas, small_config, vocabulary, seed=4)
        model, metadata, loaded_vocab, config = load_model(path)
        assert model.kind == "ssas" and metadata["seed"] == 4
        assert loaded_vocab == vocabulary
        assert config.model == small_config.model
        original = ssas.state_arrays()
        restored = model.state_arrays()
        assert sorted(original) == sorted(restored)
        for name, values in original.items():
            np.testing.assert_array_equal(restored[name], values)

    def test_deterministic_bytes(self, tmp_path, ssas, vocabulary, small_config):
        """Test saving twice produces identical files."""
        first = save_checkpoint(tmp_path / "a.ckpt", ssas, small_config, vocabulary, seed=4)
        second = save_checkpoint(tmp_path / "b.ckpt", ssas, small_config, vocabulary, seed=4)
        assert first.read_bytes() == second.read_bytes()

    def test_header_layout(self, tmp_path, ssas, vocabulary, small_config):
        """Test magic, header length and sorted array listing."""
        path = save_checkpoint(
            tmp_path / "m.ckpt", ssas, small_config, vocabulary, seed=4, epoch=3,
            metrics={"val_loss": 0.5},
        )
        blob = path.read_bytes()
        assert blob[:8] == MAGIC
        (length,) = struct.unpack_from("<I", blob, 8)
        metadata = json.loads(blob[12 : 12 + length])
        names = [a["name"] for a in metadata["arrays"]]
        assert names == sorted(names)
        assert metadata["epoch"] == 3 and metadata["metrics"] == {"val_loss": 0.5}
        sections = {"generation", "encoder", "model", "training", "evaluation"}
        assert set(metadata["config"]) == sections

    def test_spatialshift_kernels(self, tmp_path, vocabulary, small_config, scene):
        """Test statistical kernels survive the round trip."""
        kernels = estimate_spatial_shift_kernels([scene], vocabulary, 14)
        model = create_model("spatialshift", vocabulary, small_config, seed=1, stat_kernels=kernels)
        path = save_checkpoint(tmp_path / "s.ckpt", model, small_config, vocabulary, seed=1)
        restored, _, _, _ = load_model(path, expected_kind="spatialshift")
        np.testing.assert_allclose(restored.stat_kernels, model.stat_kernels, rtol=1e-6)


class TestCheckpointErrors:
    """Tests for rejected checkpoint files."""

    def test_bad_magic(self, tmp_path):
        """Test a foreign file is rejected."""
        path = tmp_path / "x.ckpt"
        path.write_bytes(b"NOTACKPT" + b"\x00" * 16)
        with pytest.raises(CheckpointError, match="magic"):
            read_checkpoint(path)

    def test_missing_file(self, tmp_path):
        """Test an absent path is a checkpoint error."""
        with pytest.raises(CheckpointError):
            read_checkpoint(tmp_path / "absent.ckpt")

    def test_kind_mismatch(self, tmp_path, ssas, vocabulary, small_config):
        """Test loading with the wrong expected kind."""
        path = save_checkpoint(tmp_path / "m.ckpt", ssas, small_config, vocabulary, seed=4)
        with pytest.raises(CheckpointError, match="expected vrd"):
            load_model(path, expected_kind="vrd")

    def test_truncated(self, tmp_path, ssas, vocabulary, small_config):
        """Test a file cut inside the arrays is rejected."""
        path = save_checkpoint(tmp_path / "m.ckpt", ssas, small_config, vocabulary, seed=4)
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(CheckpointError, match="truncated"):
            read_checkpoint(path)

    def test_trailing_bytes(self, tmp_path, ssas, vocabulary, small_config):
        """Test extra bytes after the last array are rejected."""
        path = save_checkpoint(tmp_path / "m.ckpt", ssas, small_config, vocabulary, seed=4)
        path.write_bytes(path.read_bytes() + b"\x00\x00\x00\x00")
        with pytest.raises(CheckpointError, match="trailing"):
            read_checkpoint(path)

    def test_shape_mismatch(self, tmp_path, ssas, vocabulary, small_config):
        """Test arrays that do not fit the embedded configuration are rejected."""
        path = save_checkpoint(tmp_path / "m.ckpt", ssas, small_config, vocabulary, seed=4)
        metadata, arrays = read_checkpoint(path)
        arrays["embeddings"] = np.zeros((2, 2), dtype=np.float32)
        with pytest.raises(CheckpointError):
            ssas.load_state_arrays(arrays)

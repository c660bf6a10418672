"""Tests for the oracle and trainable feature encoders."""

import numpy as np
import pytest

from src.config_models import EncoderConfig, GenConfig
from src.errors import ConfigError
from src.models.base import attend
from src.models.encoder import CnnEncoder, OracleEncoder, build_encoder, oracle_encode
from src.scenes import Entity, Scene, Vocabulary, box_coverage
from src.tensor import Tensor


@pytest.fixture
def vocabulary():
    return Vocabulary.from_config(GenConfig())


@pytest.fixture
def scene():
    entities = (Entity(0, (0, 0, 16, 16)), Entity(4, (30, 34, 46, 50)))
    return Scene("s", 64, 64, entities, (), 0)


class TestOracleEncoder:
    """Tests for the per-cell category coverage encoding."""

    def test_shape_and_dtype(self, scene, vocabulary):
        """Test an L x L x (|E|+1) float32 grid."""
        features = oracle_encode(scene, vocabulary, 14)
        assert features.grid.shape == (14, 14, 13)
        assert features.grid.dtype == np.float32
        assert (features.L, features.C) == (14, 13)

    def test_disjoint_channels_sum_to_one(self, scene, vocabulary):
        """Test category and background coverage partition each cell."""
        grid = oracle_encode(scene, vocabulary, 14).grid.values
        np.testing.assert_allclose(grid.sum(axis=-1), np.ones((14, 14)), atol=1e-6)

    def test_channel_matches_box_coverage(self, scene, vocabulary):
        """Test a category channel equals its box coverage."""
        grid = oracle_encode(scene, vocabulary, 14).grid.values
        expected = box_coverage((30, 34, 46, 50), 64, 64, 14)
        np.testing.assert_allclose(grid[..., 4], expected, atol=1e-6)
        assert not grid[..., 1].any()

    def test_one_hot_attention_is_coverage(self, scene, vocabulary):
        """Test attending with a one-hot embedding returns that category's coverage."""
        features = oracle_encode(scene, vocabulary, 14)
        one_hot = np.zeros(13, dtype=np.float32)
        one_hot[0] = 1.0
        attention = attend(features.grid, Tensor(one_hot))
        np.testing.assert_allclose(attention.activated.values, features.grid.values[..., 0])

    def test_image_smaller_than_grid(self, vocabulary):
        """Test a grid finer than the image is a configuration error."""
        with pytest.raises(ConfigError):
            oracle_encode(Scene("tiny", 8, 8, (), (), 0), vocabulary, 14)

    def test_encoder_requires_features(self):
        """Test the pass-through encoder rejects batches without features."""

        class Empty:
            features = None

        with pytest.raises(ConfigError):
            OracleEncoder(14, 13).encode_batch(Empty())


class TestCnnEncoder:
    """Tests for the trainable convolutional encoder."""

    def test_output_shape(self):
        """Test single images and batches crop to L x L x C."""
        config = EncoderConfig(mode="trainable", channels=6)
        encoder = CnnEncoder(config, 64, 6, np.random.default_rng(0))
        rng = np.random.default_rng(1)
        assert encoder.encode(Tensor(rng.random((64, 64, 3)))).shape == (14, 14, 6)
        assert encoder.encode(Tensor(rng.random((2, 64, 64, 3)))).shape == (2, 14, 14, 6)

    def test_parameters(self):
        """Test three conv layers with biases and the configured widths."""
        config = EncoderConfig(mode="trainable", channels=6, conv_widths=[4, 5])
        params = CnnEncoder(config, 64, 6).parameters()
        assert sorted(params) == ["bias1", "bias2", "bias3", "conv1", "conv2", "conv3"]
        assert params["conv1"].shape == (3, 3, 3, 4)
        assert params["conv3"].shape == (3, 3, 5, 6)

    def test_non_negative_features(self):
        """Test ReLU outputs are non-negative."""
        config = EncoderConfig(mode="trainable", channels=4)
        encoder = CnnEncoder(config, 64, 4, np.random.default_rng(2))
        out = encoder.encode(Tensor(np.random.default_rng(3).random((64, 64, 3))))
        assert out.values.min() >= 0.0

    @pytest.mark.parametrize("image_size", [62, 48])
    def test_incompatible_image_size(self, image_size):
        """Test sizes that do not pool evenly or pool below L are rejected."""
        with pytest.raises(ConfigError):
            CnnEncoder(EncoderConfig(mode="trainable"), image_size, 8)

    def test_build_encoder_modes(self):
        """Test the factory picks the encoder and channel count."""
        oracle = build_encoder(EncoderConfig(), 12, 64)
        assert isinstance(oracle, OracleEncoder) and oracle.channels == 13
        cnn = build_encoder(EncoderConfig(mode="trainable"), 12, 64)
        assert isinstance(cnn, CnnEncoder) and cnn.channels == 32

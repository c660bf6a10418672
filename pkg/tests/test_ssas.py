"""Tests for attention, shift stacks and the SSAS rollout."""

import numpy as np
import pytest

from src.config_models import ModelConfig
from src.errors import ConfigError, DimensionError
from src.models.base import QueryBatch, attend
from src.models.encoder import OracleEncoder
from src.models.query import MASKED, Query
from src.models.ssas import (
    SsasModel,
    SsasParams,
    infer_rollout,
    layer_channels,
    shift,
    validate_shift_geometry,
)
from src.tensor import Tensor, parameter


def np_conv(x: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Straightforward same-padded cross-correlation for (H, W, Cin) inputs."""
    k = kernel.shape[0]
    pad = k // 2
    padded = np.pad(x, ((pad, pad), (pad, pad), (0, 0)))
    height, width = x.shape[:2]
    out = np.zeros((height, width, kernel.shape[-1]))
    for i in range(height):
        for j in range(width):
            out[i, j] = np.einsum("abc,abco->o", padded[i : i + k, j : j + k], kernel)
    return out


def reference_rollout(mu, query, params, iterations):
    """Plain numpy rollout returning the final (subject, object) logits."""
    table = params.embeddings.values

    def row(entity):
        return table[params.unknown_id if entity == MASKED else entity]

    def stack(source, tables):
        x = source[..., None]
        for t in tables:
            z = np_conv(x, t.values[query.predicate])
            x = np.maximum(z, 0.0)
        return x[..., 0]

    s_emb, o_emb = row(query.subject), row(query.object)
    s_logits, o_logits = mu @ s_emb, mu @ o_emb
    for _ in range(iterations):
        s_act, o_act = np.maximum(s_logits, 0.0), np.maximum(o_logits, 0.0)
        to_object = stack(s_act, params.forward)
        to_subject = stack(o_act, params.inverse)
        s_logits = (to_subject[..., None] * mu) @ s_emb
        o_logits = (to_object[..., None] * mu) @ o_emb
    return s_logits, o_logits


def small_params(rng, kernel_init="uniform", init_noise=0.1, dtype=np.float64, **kwargs):
    config = ModelConfig(
        kernel_size=kwargs.get("kernel_size", 3),
        shift_layers=kwargs.get("shift_layers", 2),
        shift_channels=kwargs.get("shift_channels", 2),
        kernel_init=kernel_init,
        init_noise=init_noise,
        embedding_scale=0.5,
    )
    return SsasParams.initialize(3, 2, 4, config, rng, dtype)


class TestShiftGeometry:
    """Tests for shift-stack validation and layout."""

    def test_reaching_stack_accepted(self):
        """Test three 5x5 layers cover a 14 grid."""
        validate_shift_geometry(3, 5, 14)

    @pytest.mark.parametrize("n,k", [(2, 5), (2, 7), (1, 13)])
    def test_short_reach_rejected(self, n, k):
        """Test stacks with n*k <= L are rejected."""
        with pytest.raises(ConfigError):
            validate_shift_geometry(n, k, 14)

    @pytest.mark.parametrize("k", [4, 0])
    def test_even_or_empty_kernel_rejected(self, k):
        """Test kernel sizes must be positive and odd."""
        with pytest.raises(ConfigError):
            validate_shift_geometry(5, k, 14)

    def test_layer_channels(self):
        """Test single-channel ends with hidden widths between."""
        assert layer_channels(3, 10) == [1, 10, 10, 1]
        assert layer_channels(1, 10) == [1, 1]

    def test_parameter_shapes(self):
        """Test kernel tables hold one stack per predicate."""
        params = small_params(np.random.default_rng(0))
        assert params.embeddings.shape == (4, 4)
        assert params.forward[0].shape == (2, 3, 3, 1, 2)
        assert params.inverse[1].shape == (2, 3, 3, 2, 1)
        assert params.unknown_id == 3 and params.n_predicates == 2
        assert sorted(params.named()) == [
            "embeddings", "forward/0", "forward/1", "inverse/0", "inverse/1",
        ]

    def test_embeddings_start_non_negative(self):
        """Test initial embeddings are non-negative, so no attention map starts empty."""
        params = small_params(np.random.default_rng(0))
        assert (params.embeddings.values >= 0).all()
        assert params.embeddings.values.any()

    def test_identity_init_centre(self):
        """Test noiseless identity kernels put 1/c_in at the centre only."""
        params = small_params(np.random.default_rng(0), kernel_init="identity", init_noise=0.0)
        second = params.forward[1].values
        assert second[:, 1, 1].ravel() == pytest.approx([0.5, 0.5, 0.5, 0.5])
        assert np.abs(second).sum() == pytest.approx(2.0)


class TestShift:
    """Tests for the conv+ReLU shift stack."""

    def test_identity_kernels_preserve_map(self):
        """Test centre kernels with 1/c_in weights leave a non-negative map unchanged."""
        params = small_params(np.random.default_rng(1), kernel_init="identity", init_noise=0.0)
        source = Tensor(np.random.default_rng(2).random((6, 6)), dtype=np.float64)
        out = shift(source, params.predicate_kernels(np.int64(0)).forward)
        np.testing.assert_allclose(out.activated.values, source.values)
        np.testing.assert_allclose(out.logits.values, source.values)

    def test_all_ones_support(self):
        """Test positive kernels spread a delta exactly n * floor(k/2) cells."""
        source = np.zeros((15, 15))
        source[7, 7] = 1.0
        kernels = [
            parameter(np.ones((3, 3, 1, 2)), dtype=np.float64),
            parameter(np.ones((3, 3, 2, 1)), dtype=np.float64),
        ]
        out = shift(Tensor(source, dtype=np.float64), kernels).activated.values
        rows, cols = np.indices(out.shape)
        within = np.maximum(np.abs(rows - 7), np.abs(cols - 7)) <= 2
        assert (out[within] > 0).all()
        assert not out[~within].any()

    def test_stack_must_be_single_channel_at_ends(self):
        """Test a stack that does not end in one channel is rejected."""
        kernels = [parameter(np.ones((3, 3, 1, 2)))]
        with pytest.raises(DimensionError):
            shift(Tensor(np.ones((4, 4))), kernels)


class TestRollout:
    """Tests for iterative subject/object refinement."""

    @pytest.fixture
    def mu(self):
        return Tensor(np.random.default_rng(3).random((4, 4, 4)), dtype=np.float64)

    def test_zero_iterations_is_plain_attention(self, mu):
        """Test t=0 returns attention from the subject and object embeddings."""
        params = small_params(np.random.default_rng(4))
        out = infer_rollout(mu, Query(0, 1, 2), params, 0)
        expected = attend(mu, Tensor(params.embeddings.values[0], dtype=np.float64))
        np.testing.assert_allclose(out.subject.logits.values, expected.logits.values)
        np.testing.assert_allclose(
            out.object.activated.values, np.maximum(mu.values @ params.embeddings.values[2], 0)
        )
        assert len(out.trace) == 1

    def test_identity_shift_one_iteration(self, mu):
        """Test t=1 with identity shifts modulates features by the other role's attention."""
        params = small_params(np.random.default_rng(5), kernel_init="identity", init_noise=0.0)
        out = infer_rollout(mu, Query(0, 0, 1), params, 1)
        table = params.embeddings.values
        o_act = np.maximum(mu.values @ table[1], 0.0)
        expected = (o_act[..., None] * mu.values) @ table[0]
        np.testing.assert_allclose(out.subject.logits.values, expected, atol=1e-12)

    @pytest.mark.parametrize("query", [Query(0, 1, 2), Query(MASKED, 0, 1), Query(2, 1, MASKED)])
    def test_two_iterations_match_reference(self, mu, query):
        """Test a t=2 rollout against a plain numpy implementation."""
        params = small_params(np.random.default_rng(6))
        out = infer_rollout(mu, query, params, 2)
        s_ref, o_ref = reference_rollout(mu.values, query, params, 2)
        np.testing.assert_allclose(out.subject.logits.values, s_ref, rtol=1e-10, atol=1e-12)
        np.testing.assert_allclose(out.object.logits.values, o_ref, rtol=1e-10, atol=1e-12)

    def test_positive_matches_stay_active(self, mu):
        """Test positive matches keep every iteration's activated map strictly positive."""
        params = small_params(np.random.default_rng(13), kernel_init="identity", init_noise=0.0)
        params.embeddings.values = np.abs(params.embeddings.values) + 0.1
        out = infer_rollout(mu, Query(0, 0, 1), params, 2)
        for subject, obj in out.trace:
            for attention in (subject, obj):
                activated = attention.activated.values
                np.testing.assert_array_equal(activated, np.maximum(attention.logits.values, 0))
                assert (activated > 0).all()

    def test_trace_maps_are_grid_sized(self, mu):
        """Test every iteration's maps keep the L x L shape."""
        params = small_params(np.random.default_rng(7))
        out = infer_rollout(mu, Query(0, 0, 1), params, 3)
        assert len(out.trace) == 4
        for subject, obj in out.trace:
            assert subject.activated.shape == (4, 4)
            assert obj.logits.shape == (4, 4)

    def test_argmax_invariant_to_feature_scale(self, mu):
        """Test scaling mu by a positive constant keeps the most attended cell."""
        params = small_params(np.random.default_rng(8))
        base = infer_rollout(mu, Query(0, 1, 2), params, 2)
        scaled = infer_rollout(Tensor(mu.values * 3.0, dtype=np.float64), Query(0, 1, 2), params, 2)
        assert np.argmax(base.subject.logits.values) == np.argmax(scaled.subject.logits.values)
        assert np.argmax(base.object.logits.values) == np.argmax(scaled.object.logits.values)

    def test_negative_iterations_rejected(self, mu):
        """Test t must be non-negative."""
        with pytest.raises(ConfigError):
            infer_rollout(mu, Query(0, 0, 1), small_params(np.random.default_rng(9)), -1)


class TestSsasModel:
    """Tests for the batched model."""

    def test_batch_matches_single_queries(self):
        """Test per-example predicate kernels reproduce the single-query rollout."""
        rng = np.random.default_rng(10)
        params = small_params(rng)
        model = SsasModel(OracleEncoder(4, 4), params, iterations=2)
        features = rng.random((2, 4, 4, 4))
        batch = QueryBatch(
            subjects=np.array([0, MASKED]),
            predicates=np.array([1, 0]),
            objects=np.array([2, 1]),
            features=Tensor(features, dtype=np.float64),
        )
        out = model.forward(batch)
        for i, query in enumerate([Query(0, 1, 2), Query(MASKED, 0, 1)]):
            single = infer_rollout(Tensor(features[i], dtype=np.float64), query, params, 2)
            np.testing.assert_allclose(
                out.subject.logits.values[i], single.subject.logits.values, atol=1e-12
            )
            np.testing.assert_allclose(
                out.object.logits.values[i], single.object.logits.values, atol=1e-12
            )

    def test_embedding_width_must_match_encoder(self):
        """Test a mismatched channel count is a configuration error."""
        params = small_params(np.random.default_rng(11))
        with pytest.raises(ConfigError):
            SsasModel(OracleEncoder(4, 5), params)

    def test_parameters_exclude_oracle(self):
        """Test the oracle adds no trainable parameters."""
        model = SsasModel(OracleEncoder(4, 4), small_params(np.random.default_rng(12)))
        assert set(model.parameters()) == set(model.params.named())

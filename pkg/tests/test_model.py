import numpy as np
import pytest

from dllapnet.errors import InvalidArgumentError, MissingTensorError
from dllapnet.io_codec import WeightArchive, random_init, zero_weights
from dllapnet.model import (
    ModelConfig,
    convnext_v2_block,
    count_flops,
    forward_batch,
    layer_macs,
    parameter_specs,
    prepare_params,
    synthesize_batch,
)

from . import oracles
from .conftest import tiny_config


def tiny_mel(rng, cfg, frames=9):
    return rng.normal(-3.0, 2.0, (frames, cfg.n_mels))


class TestConfig:
    def test_defaults(self):
        cfg = ModelConfig()
        assert (cfg.n_mels, cfg.n_bins, cfg.hidden, cfg.intermediate, cfg.num_blocks) == (
            80, 513, 512, 1536, 8,
        )
        assert cfg.causal and cfg.grn_mode == "causal_cumulative"

    def test_causal_requires_cumulative_grn(self):
        with pytest.raises(InvalidArgumentError, match="causal_cumulative"):
            ModelConfig(grn_mode="global")

    def test_intermediate_at_least_hidden(self):
        with pytest.raises(InvalidArgumentError):
            ModelConfig(hidden=8, intermediate=4)

    def test_teacher_is_noncausal_global(self):
        t = ModelConfig().teacher()
        assert not t.causal and t.grn_mode == "global"


class TestBlock:
    def test_zero_input_zero_biases(self, rng, tiny_cfg):
        w = zero_weights(tiny_cfg).updated(
            {"amplitude.blocks.0.norm.gamma": rng.standard_normal(4),
             "amplitude.blocks.0.pw1.weight": rng.standard_normal((6, 4))}
        )
        block = prepare_params(w, tiny_cfg).amplitude.blocks[0]
        assert not convnext_v2_block(np.zeros((5, 4)), block, tiny_cfg).any()

    @pytest.mark.parametrize("causal", [True, False])
    def test_matches_scalar_oracle(self, rng, causal):
        cfg = tiny_config(hidden=2, intermediate=3, causal=causal,
                          grn_mode="causal_cumulative" if causal else "global")
        w = random_init(cfg, seed=11)
        x = rng.standard_normal((4, 2))
        block = prepare_params(w, cfg).phase.blocks[1]
        expected = oracles.block(x, {k: np.asarray(v, float) for k, v in w.items()}, "phase.blocks.1", causal)
        np.testing.assert_allclose(convnext_v2_block(x, block, cfg), expected, atol=1e-12)

    def test_causal_prefix(self, rng, tiny_cfg, tiny_weights):
        block = prepare_params(tiny_weights, tiny_cfg).amplitude.blocks[0]
        x = rng.standard_normal((12, 4))
        y = convnext_v2_block(x, block, tiny_cfg)
        x2 = x.copy()
        x2[6] += 3.0
        assert np.array_equal(convnext_v2_block(x2, block, tiny_cfg)[:6], y[:6])

    def test_wrong_width(self, tiny_cfg, tiny_weights):
        block = prepare_params(tiny_weights, tiny_cfg).amplitude.blocks[0]
        with pytest.raises(InvalidArgumentError):
            convnext_v2_block(np.zeros((3, 5)), block, tiny_cfg)


class TestForward:
    @pytest.mark.parametrize("causal", [True, False])
    def test_matches_naive_recomputation(self, rng, causal):
        cfg = tiny_config(causal=causal, grn_mode="causal_cumulative" if causal else "global")
        w = random_init(cfg, seed=5)
        mel = tiny_mel(rng, cfg)
        pair, trace = forward_batch(mel, w, cfg)
        log_amp, phase, feats = oracles.forward(mel, w, cfg.num_blocks, causal)
        np.testing.assert_allclose(pair.log_amplitude, log_amp, atol=1e-11)
        np.testing.assert_allclose(pair.phase, phase, atol=1e-11)
        for branch, ref in feats.items():
            got = trace.branches()[branch]
            np.testing.assert_allclose(got.input_conv_out, ref[0], atol=1e-11)
            for a, b in zip(got.block_outs, ref[1:]):
                np.testing.assert_allclose(a, b, atol=1e-11)

    def test_zero_weights(self, tiny_cfg):
        bias = np.linspace(-1, 1, tiny_cfg.n_bins)
        w = zero_weights(tiny_cfg).updated({"amplitude.head.bias": bias})
        pair, _ = forward_batch(np.zeros((6, tiny_cfg.n_mels)), w, tiny_cfg)
        np.testing.assert_allclose(pair.log_amplitude, np.tile(bias.astype(np.float32), (6, 1)))
        assert not pair.phase.any()

    def test_trace_shapes(self, rng, tiny_cfg, tiny_weights):
        _, trace = forward_batch(tiny_mel(rng, tiny_cfg, 7), tiny_weights, tiny_cfg)
        for branch in trace.branches().values():
            assert len(branch.block_outs) == tiny_cfg.num_blocks
            for feat in [branch.input_conv_out, *branch.block_outs]:
                assert feat.shape == (7, tiny_cfg.hidden)

    def test_truncation_reproduces_prefix(self, rng, tiny_cfg, tiny_weights):
        mel = tiny_mel(rng, tiny_cfg, 20)
        full, full_trace = forward_batch(mel, tiny_weights, tiny_cfg)
        for t in (1, 7, 19):
            part, part_trace = forward_batch(mel[:t], tiny_weights, tiny_cfg)
            # BLAS may pick a different kernel for a different row count, so
            # rows agree to rounding only; same-length runs are bit-exact
            np.testing.assert_allclose(part.log_amplitude, full.log_amplitude[:t], rtol=0, atol=1e-12)
            np.testing.assert_allclose(part.phase, full.phase[:t], rtol=0, atol=1e-12)
            np.testing.assert_allclose(
                part_trace.phase.block_outs[-1], full_trace.phase.block_outs[-1][:t], rtol=0, atol=1e-12
            )

    def test_noncausal_differs_under_perturbation(self, rng):
        cfg = tiny_config(causal=False)
        w = random_init(cfg, seed=5)
        mel = tiny_mel(rng, cfg, 20)
        mel2 = mel.copy()
        mel2[12] += 1.0
        a, _ = forward_batch(mel, w, cfg)
        b, _ = forward_batch(mel2, w, cfg)
        assert not np.array_equal(a.log_amplitude[:12], b.log_amplitude[:12])

    def test_phase_range(self, rng, tiny_cfg, tiny_weights):
        pair, _ = forward_batch(tiny_mel(rng, tiny_cfg, 30) * 10, tiny_weights, tiny_cfg)
        assert (pair.phase > -np.pi).all() and (pair.phase <= np.pi).all()

    def test_missing_tensor(self, rng, tiny_cfg, tiny_weights):
        partial = WeightArchive({k: v for k, v in tiny_weights.items() if "blocks.1.pw2.bias" not in k})
        with pytest.raises(MissingTensorError, match="blocks.1.pw2.bias"):
            forward_batch(tiny_mel(rng, tiny_cfg), partial, tiny_cfg)

    def test_wrong_shape_tensor(self, rng, tiny_cfg, tiny_weights):
        bad = tiny_weights.updated({"phase.input_conv.bias": np.zeros(5)})
        with pytest.raises(InvalidArgumentError, match="phase.input_conv.bias"):
            forward_batch(tiny_mel(rng, tiny_cfg), bad, tiny_cfg)

    def test_wrong_mel_width(self, tiny_cfg, tiny_weights):
        with pytest.raises(InvalidArgumentError):
            forward_batch(np.zeros((4, tiny_cfg.n_mels + 1)), tiny_weights, tiny_cfg)


class TestSynthesize:
    def test_length_and_finite(self, tiny_cfg):
        w = zero_weights(tiny_cfg)
        y = synthesize_batch(np.zeros((10, tiny_cfg.n_mels)), w, tiny_cfg)
        assert y.size == 9 * tiny_cfg.spectral.hop
        assert np.isfinite(y).all()

    def test_log_bias_shift_doubles_output(self, rng, tiny_cfg, tiny_weights):
        mel = tiny_mel(rng, tiny_cfg, 10)
        bias = np.asarray(tiny_weights["amplitude.head.bias"], float)
        shifted = tiny_weights.updated({"amplitude.head.bias": bias + np.log(2)})
        a = synthesize_batch(mel, tiny_weights, tiny_cfg)
        b = synthesize_batch(mel, shifted, tiny_cfg)
        # float32 storage of the shifted bias perturbs the gain by ~1e-7
        np.testing.assert_allclose(b, 2 * a, rtol=1e-5, atol=1e-6 * np.abs(a).max())


class TestFlops:
    def test_single_input_conv(self):
        rows = dict(layer_macs(ModelConfig()))
        assert rows["amplitude.input_conv"] == 80 * 512 * 7 == 286_720

    def test_tiny_config_hand_table(self):
        cfg = ModelConfig(hidden=4, intermediate=12, num_blocks=2)
        # per branch input conv 80*4*7 = 2240 (x2 branches = 4480)
        # per block dw 28 + norm 8 + pw1 48 + grn 24 + pw2 48 = 156 (x2 blocks x2 branches = 624)
        # heads: amplitude + real + imag = 3 * 4*513*7 = 43092
        assert sum(n for _, n in layer_macs(cfg)) == 4480 + 624 + 43092
        assert count_flops(cfg) == (4480 + 624 + 43092) * 200

    def test_default_near_reported(self):
        assert abs(count_flops(ModelConfig()) / 6.30e9 - 1) <= 0.25

    def test_causality_does_not_change_flops(self):
        assert count_flops(ModelConfig()) == count_flops(ModelConfig().teacher())

    def test_spec_names_cover_macs(self):
        names = {n.rsplit(".", 1)[0] for n in parameter_specs(ModelConfig(num_blocks=1))}
        assert {name for name, _ in layer_macs(ModelConfig(num_blocks=1))} == names

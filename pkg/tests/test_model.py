"""Transformer contracts: causality, init statistics, training mechanics,
sampler/trainer equivalence, sampling determinism.
"""

import numpy as np
import pytest

from patchflow.errors import ContextError, ContractError
from patchflow.model import (
    CachedSampler,
    ModelConfig,
    PoseBinning,
    SequenceModel,
    build_flow_sequence,
    build_rgb_sequence,
    sample_flow,
    sample_rgb,
    sequence_loss,
    train_step,
)
from patchflow.geometry import RigidTransform
from patchflow.sequence import VocabLayout
from patchflow.tensor import Adam


def micro_layout():
    return VocabLayout(rgb_bits=5, flow_bits=4, grid_h=3, grid_w=3, pose_bins=8)


def micro_model(variant="rgb", seed=0):
    layout = micro_layout()
    cfg = ModelConfig(variant=variant, layers=2, heads=2, embed_dim=64, context_len=64)
    return SequenceModel(cfg, layout, seed=seed)


def random_rgb_seq(layout, rng, frac=1.0):
    rgb = rng.integers(0, 1 << layout.rgb_bits, size=(3, 3))
    flow = rng.integers(0, 1 << layout.flow_bits, size=(3, 3))
    target = rng.integers(0, 1 << layout.rgb_bits, size=(3, 3))
    return build_rgb_sequence(layout, rgb, flow, target, rng.permutation(9), frac)


class TestForward:
    def test_causality_future_mutation(self, rng):
        model = micro_model()
        seq = random_rgb_seq(model.layout, rng)
        tokens = seq.tokens[None, :]
        base = model.forward(tokens).data
        for _ in range(20):
            t = int(rng.integers(5, len(seq.tokens) - 1))
            mutated = tokens.copy()
            lo, hi = model.layout.content_range("rgb")
            mutated[0, t + 1 :] = rng.integers(lo, hi, size=len(seq.tokens) - t - 1)
            out = model.forward(mutated).data
            np.testing.assert_array_equal(out[0, : t + 1], base[0, : t + 1])

    def test_init_entropy_near_uniform(self, rng):
        model = micro_model()
        seq = random_rgb_seq(model.layout, rng)
        logits = model.forward(seq.tokens[None]).data[0].astype(np.float64)
        z = logits - logits.max(axis=-1, keepdims=True)
        p = np.exp(z)
        p /= p.sum(axis=-1, keepdims=True)
        entropy = -(p * np.log(p)).sum(axis=-1)
        target = np.log(model.layout.total_size)
        assert np.all(np.abs(entropy - target) / target < 0.05)

    def test_identical_rows_identical_logits(self, rng):
        model = micro_model()
        seq = random_rgb_seq(model.layout, rng)
        batch = np.stack([seq.tokens] * 3)
        out = model.forward(batch).data
        np.testing.assert_array_equal(out[0], out[1])
        np.testing.assert_array_equal(out[0], out[2])

    def test_overlong_sequence_rejected(self, rng):
        model = micro_model()
        with pytest.raises(ContextError):
            model.forward(np.zeros((1, model.cfg.context_len + 1), dtype=np.int64))


class TestTraining:
    def test_init_loss_matches_content_vocab(self, rng):
        model = micro_model()
        seqs = [random_rgb_seq(model.layout, rng) for _ in range(4)]
        from patchflow.model import batch_arrays

        tokens, mask = batch_arrays(seqs)
        loss = sequence_loss(model, tokens, mask).item()
        assert loss == pytest.approx(np.log(1 << model.layout.rgb_bits), rel=0.02)

    def test_overfit_single_batch(self, rng):
        # 8 fixed sequences must be memorized quickly; gradients stay finite
        model = micro_model(seed=3)
        seqs = [random_rgb_seq(model.layout, rng) for _ in range(8)]
        opt = Adam(model.params, lr=3e-3, warmup_steps=50)
        losses = []
        for step in range(2000):
            loss = train_step(model, seqs, opt)
            assert np.isfinite(loss)
            losses.append(loss)
            if step > 200 and loss < 0.05:
                break
        assert min(losses) < 0.1, f"failed to overfit: final loss {losses[-1]:.4f}"

    def test_deterministic_training(self, rng):
        results = []
        for _ in range(2):
            model = micro_model(seed=9)
            local = np.random.default_rng(7)
            seqs = [random_rgb_seq(model.layout, local) for _ in range(4)]
            opt = Adam(model.params, lr=1e-3)
            for _ in range(20):
                train_step(model, seqs, opt)
            results.append(model.params["head"].data.copy())
        assert np.array_equal(results[0], results[1])

    def test_mask_on_conditioning_rejected(self, rng):
        model = micro_model()
        seq = random_rgb_seq(model.layout, rng)
        seq.mask[1] = 1.0  # a conditioning position
        with pytest.raises(ContractError, match="conditioning"):
            train_step(model, [seq], Adam(model.params))

    def test_wrong_variant_rejected(self, rng):
        model = micro_model(variant="flow")
        seq = random_rgb_seq(model.layout, rng)
        with pytest.raises(ContractError, match="variant"):
            train_step(model, [seq], Adam(model.params))


class TestSampler:
    def test_cached_logits_match_full_forward(self, rng):
        model = micro_model(seed=5)
        seq = random_rgb_seq(model.layout, rng)
        tokens = seq.tokens[None]
        full = model.forward(tokens).data[0]
        sampler = CachedSampler(model)
        prefix = 7
        state, logits = sampler.prefill(tokens[:, :prefix])
        np.testing.assert_allclose(logits[0], full[prefix - 1], rtol=1e-4, atol=1e-4)
        for t in range(prefix, tokens.shape[1]):
            logits = sampler.step(state, tokens[:, t])
            np.testing.assert_allclose(logits[0], full[t], rtol=1e-4, atol=1e-4)

    def test_same_seed_same_output(self, rng):
        model = micro_model(seed=6)
        layout = model.layout
        rgb = rng.integers(0, 1 << layout.rgb_bits, size=(3, 3))
        flow = rng.integers(0, 1 << layout.flow_bits, size=(3, 3))
        a = sample_rgb(model, rgb, flow, policy="random", seed=4, temperature=1.0)
        b = sample_rgb(model, rgb, flow, policy="random", seed=4, temperature=1.0)
        np.testing.assert_array_equal(a, b)

    def test_two_seeds_differ_at_temperature_one(self, rng):
        model = micro_model(seed=6)
        layout = model.layout
        rgb = rng.integers(0, 1 << layout.rgb_bits, size=(3, 3))
        flow = rng.integers(0, 1 << layout.flow_bits, size=(3, 3))
        a = sample_rgb(model, rgb, flow, seed=1, temperature=1.0)
        b = sample_rgb(model, rgb, flow, seed=2, temperature=1.0)
        assert not np.array_equal(a, b)

    def test_tiny_temperature_equals_greedy(self, rng):
        model = micro_model(seed=8)
        layout = model.layout
        rgb = rng.integers(0, 1 << layout.rgb_bits, size=(3, 3))
        flow = rng.integers(0, 1 << layout.flow_bits, size=(3, 3))
        greedy = sample_rgb(model, rgb, flow, seed=0, temperature=0.0)
        cold = sample_rgb(model, rgb, flow, seed=0, temperature=1e-4, top_k=0)
        np.testing.assert_array_equal(greedy, cold)

    def test_codes_within_content_vocab(self, rng):
        model = micro_model(seed=6)
        layout = model.layout
        rgb = rng.integers(0, 1 << layout.rgb_bits, size=(3, 3))
        flow = rng.integers(0, 1 << layout.flow_bits, size=(3, 3))
        for policy in ("raster", "random", "center-out", "parallel-stripes(3)"):
            out = sample_rgb(model, rgb, flow, policy=policy, seed=3, temperature=0.7)
            assert out.shape == (3, 3)
            assert out.max() < 1 << layout.rgb_bits

    def test_flow_variant_sampling(self, rng):
        model = micro_model(variant="flow", seed=2)
        layout = model.layout
        rgb = rng.integers(0, 1 << layout.rgb_bits, size=(3, 3))
        pose = rng.integers(0, 8, size=6)
        out = sample_flow(model, rgb, pose, seed=1)
        assert out.shape == (3, 3)
        assert out.max() < 1 << layout.flow_bits
        out_nopose = sample_flow(model, rgb, None, seed=1)
        assert out_nopose.shape == (3, 3)

    def test_variant_mismatch_rejected(self, rng):
        model = micro_model(variant="rgb")
        with pytest.raises(ContractError):
            sample_flow(model, np.zeros((3, 3), dtype=int), None)


class TestPoseBinning:
    def test_quantize_dequantize_error_bound(self, rng):
        binning = PoseBinning(bins=64)
        rot_w = 2 * binning.rot_range / 64
        trans_w = 2 * binning.trans_range / 64
        for _ in range(200):
            angles = rng.uniform(-binning.rot_range * 0.99, binning.rot_range * 0.99, 3)
            t = rng.uniform(-binning.trans_range * 0.99, binning.trans_range * 0.99, 3)
            delta = RigidTransform.from_euler(*angles, t=t)
            back = binning.decode(binning.encode(delta))
            # compare recovered euler angles and translation
            b2 = PoseBinning(bins=1 << 20)
            fine = b2.encode(delta)
            fine_back = b2.decode(fine)
            np.testing.assert_allclose(back.t, delta.t, atol=trans_w / 2 + 1e-9)
            err_rot = np.abs(back.R - fine_back.R).max()
            assert err_rot < rot_w  # half-bin angle error propagated through R

    def test_round_trip_checkpoint(self, tmp_path, rng):
        model = micro_model(seed=4)
        path = tmp_path / "model.ckpt"
        model.save(path)
        again = SequenceModel.load(path)
        assert again.cfg == model.cfg
        assert again.layout == model.layout
        seq = random_rgb_seq(model.layout, rng)
        np.testing.assert_array_equal(
            model.forward(seq.tokens[None]).data, again.forward(seq.tokens[None]).data
        )

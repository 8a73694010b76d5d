"""Pointer-content serialization: layout bijection, round trips, schedules,
alternation validation, fuzz robustness, binary records.
"""

import numpy as np
import pytest

from patchflow.errors import (
    AlternationError,
    ConfigError,
    DataError,
    PatchflowError,
    PermutationError,
    VocabularyError,
)
from patchflow.sequence import (
    CondBlock,
    LrasSequence,
    VocabLayout,
    causal_mask,
    decode_schedule,
    deserialize,
    load_sequence,
    save_sequence,
    serialize,
)


def toy_layout(gh=3, gw=3):
    return VocabLayout(rgb_bits=4, flow_bits=3, grid_h=gh, grid_w=gw, pose_bins=8)


def rgb_cond(layout, rng):
    return CondBlock("rgb", rng.integers(0, 1 << layout.rgb_bits, size=(layout.grid_h, layout.grid_w)))


class TestVocabLayout:
    def test_bijection_over_total_size(self):
        layout = toy_layout()
        seen = set()
        for t in range(layout.total_size):
            kind, payload = layout.describe(t)
            seen.add((kind, payload if not isinstance(payload, tuple) else tuple(payload)))
            # reconstruct the token from its description
            if kind == "rgb":
                back = layout.rgb_token(payload)
            elif kind == "flow":
                back = layout.flow_token(payload)
            elif kind == "pointer":
                back = layout.pointer_token(payload)
            elif kind == "pose":
                back = layout.pose_token(*payload)
            else:
                back = layout.control_token(payload)
            assert back == t
        assert len(seen) == layout.total_size

    def test_ranges_dense(self):
        layout = toy_layout()
        assert layout.total_size == (1 << 4) + (1 << 3) + 9 + 6 * 8 + 4

    def test_out_of_range_rejected(self):
        layout = toy_layout()
        with pytest.raises(VocabularyError):
            layout.rgb_token(1 << 4)
        with pytest.raises(VocabularyError):
            layout.pointer_token(9)
        with pytest.raises(VocabularyError):
            layout.describe(layout.total_size)


class TestSerialize:
    def test_2x2_identity_full_fraction(self, rng):
        layout = toy_layout(2, 2)
        target = np.arange(4).reshape(2, 2)
        seq = serialize([rgb_cond(layout, rng)], target, np.arange(4), layout,
                        subset_fraction=1.0, target_kind="rgb")
        # control + 4 cond + begin_target, then 8 target tokens (4 pairs)
        assert len(seq) == seq.conditioning_len + 8
        body = seq.tokens[seq.conditioning_len:]
        kinds = [layout.describe(t)[0] for t in body]
        assert kinds == ["pointer", "rgb"] * 4
        positions = [layout.describe(t)[1] for t in body[0::2]]
        assert positions == [0, 1, 2, 3]

    def test_half_fraction_counts(self, rng):
        layout = VocabLayout(rgb_bits=4, flow_bits=3, grid_h=8, grid_w=8, pose_bins=8)
        target = rng.integers(0, 16, size=(8, 8))
        order = rng.permutation(64)
        seq = serialize([rgb_cond(layout, rng)], target, order, layout, subset_fraction=0.5)
        pairs = (len(seq) - seq.conditioning_len) // 2
        assert pairs == 32
        assert seq.mask.sum() == 32.0

    def test_round_trip_many_permutations(self, rng):
        layout = toy_layout()
        for _ in range(200):
            target = rng.integers(0, 16, size=(3, 3))
            order = rng.permutation(9)
            frac = float(rng.uniform(0.05, 1.0))
            seq = serialize([rgb_cond(layout, rng)], target, order, layout, subset_fraction=frac)
            grid, coverage = deserialize(seq)
            n_keep = int(np.ceil(frac * 9))
            assert coverage.sum() == n_keep
            visited = coverage.reshape(-1)
            np.testing.assert_array_equal(grid.reshape(-1)[visited], target.reshape(-1)[visited])

    def test_supervision_never_on_conditioning(self, rng):
        layout = toy_layout()
        target = rng.integers(0, 16, size=(3, 3))
        seq = serialize(
            [rgb_cond(layout, rng), CondBlock("pose", rng.integers(0, 8, size=6))],
            target, rng.permutation(9), layout)
        assert not seq.mask[: seq.conditioning_len].any()

    def test_supervise_pointers_switch(self, rng):
        layout = toy_layout()
        target = rng.integers(0, 16, size=(3, 3))
        seq = serialize([rgb_cond(layout, rng)], target, np.arange(9), layout,
                        supervise_pointers=True)
        body_mask = seq.mask[seq.conditioning_len:]
        assert body_mask.all()

    def test_duplicate_position_rejected(self, rng):
        layout = toy_layout()
        target = np.zeros((3, 3), dtype=int)
        order = np.array([0, 1, 1, 2, 3, 4, 5, 6, 7])
        with pytest.raises(PermutationError, match="duplicate"):
            serialize([rgb_cond(layout, rng)], target, order, layout)

    def test_pose_pad_same_length_as_pose(self, rng):
        layout = toy_layout()
        target = np.zeros((3, 3), dtype=int)
        with_pose = serialize([rgb_cond(layout, rng), CondBlock("pose", np.zeros(6, dtype=int))],
                              target, np.arange(9), layout)
        with_pad = serialize([rgb_cond(layout, rng), CondBlock("pose_pad")],
                             target, np.arange(9), layout)
        assert len(with_pose) == len(with_pad)


class TestDeserialize:
    def _manual_seq(self, layout, pairs):
        tokens = [layout.control_token("begin_target")]
        for ptr, content in pairs:
            tokens.extend([ptr, content])
        return LrasSequence(np.array(tokens, dtype=np.int64),
                            np.zeros(len(tokens), dtype=np.float32),
                            layout, conditioning_len=1)

    def test_visiting_two_positions(self):
        layout = toy_layout()
        seq = self._manual_seq(layout, [(layout.pointer_token(0), layout.rgb_token(7)),
                                        (layout.pointer_token(5), layout.rgb_token(3))])
        grid, coverage = deserialize(seq)
        assert coverage.sum() == 2
        assert grid.reshape(-1)[0] == 7 and grid.reshape(-1)[5] == 3

    def test_empty_target_block(self):
        layout = toy_layout()
        seq = self._manual_seq(layout, [])
        _, coverage = deserialize(seq)
        assert not coverage.any()

    def test_pointer_pointer_alternation_error(self):
        layout = toy_layout()
        seq = self._manual_seq(layout, [(layout.pointer_token(0), layout.pointer_token(1))])
        with pytest.raises(AlternationError, match="pointer followed by pointer"):
            deserialize(seq)

    def test_wrong_content_range(self):
        layout = toy_layout()
        seq = self._manual_seq(layout, [(layout.pointer_token(0), layout.flow_token(2))])
        with pytest.raises(VocabularyError, match="outside expected rgb range"):
            deserialize(seq)

    def test_dangling_pointer(self):
        layout = toy_layout()
        tokens = [layout.control_token("begin_target"), layout.pointer_token(0)]
        seq = LrasSequence(np.array(tokens), np.zeros(2, dtype=np.float32), layout,
                           conditioning_len=1)
        with pytest.raises(AlternationError, match="dangling"):
            deserialize(seq)

    def test_fuzz_structured_errors_only(self, rng):
        # random token soup must produce structured errors or valid parses,
        # never a crash and never an inconsistent parse
        layout = toy_layout()
        parsed = 0
        for _ in range(500):
            n = int(rng.integers(0, 30))
            tokens = rng.integers(0, layout.total_size + 3, size=n)
            seq = LrasSequence(tokens.astype(np.int64), np.zeros(n, dtype=np.float32), layout)
            try:
                grid, coverage = deserialize(seq)
            except PatchflowError:
                continue
            parsed += 1
            assert coverage.shape == (3, 3)
            assert grid[~coverage].sum() == 0
        assert parsed < 100, "random soup parsing should be the rare case"


class TestSchedules:
    def test_raster(self):
        perm, groups = decode_schedule((2, 3), "raster")
        np.testing.assert_array_equal(perm, [0, 1, 2, 3, 4, 5])
        assert groups is None

    def test_random_deterministic(self):
        p1, _ = decode_schedule((8, 8), "random", seed=42)
        p2, _ = decode_schedule((8, 8), "random", seed=42)
        p3, _ = decode_schedule((8, 8), "random", seed=43)
        np.testing.assert_array_equal(p1, p2)
        assert not np.array_equal(p1, p3)
        assert sorted(p1) == list(range(64))

    def test_center_out_starts_at_center(self):
        perm, _ = decode_schedule((5, 5), "center-out")
        assert perm[0] == 12
        assert sorted(perm) == list(range(25))

    def test_parallel_stripes_partition(self):
        perm, groups = decode_schedule((8, 8), "parallel-stripes(4)")
        assert len(groups) == 4
        assert all(len(g) == 16 for g in groups)
        union = np.concatenate(groups)
        assert sorted(union) == list(range(64))
        for i in range(4):
            for j in range(i + 1, 4):
                assert not set(groups[i]) & set(groups[j])
        assert sorted(perm) == list(range(64))

    def test_unknown_policy(self):
        with pytest.raises(ConfigError):
            decode_schedule((4, 4), "zigzag")


class TestCausalMask:
    def test_three_token_example(self):
        np.testing.assert_array_equal(
            causal_mask(3),
            np.array([[1, 0, 0], [1, 1, 0], [1, 1, 1]], dtype=bool),
        )

    def test_shape(self):
        assert causal_mask(7).shape == (7, 7)


class TestRecords:
    def test_round_trip(self, tmp_path, rng):
        layout = toy_layout()
        target = rng.integers(0, 16, size=(3, 3))
        seq = serialize([rgb_cond(layout, rng)], target, rng.permutation(9), layout,
                        subset_fraction=0.7)
        path = tmp_path / "seq.bin"
        save_sequence(path, seq)
        loaded = load_sequence(path, layout)
        np.testing.assert_array_equal(loaded.tokens, seq.tokens)
        np.testing.assert_array_equal(loaded.mask, seq.mask)
        assert loaded.conditioning_len == seq.conditioning_len

    def test_layout_hash_mismatch_is_hard_error(self, tmp_path, rng):
        layout = toy_layout()
        seq = serialize([rgb_cond(layout, rng)], np.zeros((3, 3), dtype=int),
                        np.arange(9), layout)
        path = tmp_path / "seq.bin"
        save_sequence(path, seq)
        other = VocabLayout(rgb_bits=5, flow_bits=3, grid_h=3, grid_w=3, pose_bins=8)
        with pytest.raises(DataError, match="layout hash"):
            load_sequence(path, other)

"""Scene cache layout and corpus builders."""

import numpy as np

from patchflow.bench import render_scene, sample_scene_spec
from patchflow.bench.dataset import load_scene, save_scene, tokenizer_flows, tokenizer_frames
from patchflow.errors import ConfigError, DataError, PatchflowError, exit_code_for
from patchflow.util import rng_stream, stream_seed


class TestSceneCache:
    def test_save_load_round_trip(self, tmp_path):
        scene = render_scene(sample_scene_spec("edit", 5))
        out = save_scene(tmp_path, scene)
        assert (out / "spec.json").exists()
        assert (out / "frame_0000.png").exists()
        assert (out / "frame_0001.png").exists()
        assert (out / "flow_0000.flo").exists()
        assert (out / "depth_0000.f32").exists()
        assert any(p.name.startswith("mask_") for p in out.iterdir())
        again = load_scene(out)
        np.testing.assert_array_equal(again.frames[1], scene.frames[1])
        np.testing.assert_array_equal(again.flows[0].flow, scene.flows[0].flow)

    def test_cache_dir_name_stable(self, tmp_path):
        scene = render_scene(sample_scene_spec("static", 9, size=16))
        a = save_scene(tmp_path / "a", scene)
        b = save_scene(tmp_path / "b", scene)
        assert a.name == b.name


class TestCorpora:
    def test_frames_deterministic(self):
        a = tokenizer_frames(6, seed=4, size=16)
        b = tokenizer_frames(6, seed=4, size=16)
        assert np.array_equal(a, b)
        assert a.dtype == np.float32
        assert a.shape[1:] == (16, 16, 3)

    def test_flow_corpus_mix(self):
        flows = tokenizer_flows(16, seed=4, size=16)
        assert flows.shape[1:] == (16, 16, 2)
        mags = np.linalg.norm(flows, axis=-1).reshape(len(flows), -1).max(axis=1)
        assert (mags == 0).any(), "corpus must include exact zero fields"
        assert (mags > 8).any(), "corpus must include removal-scale flows"


class TestErrorMapping:
    def test_exit_codes(self):
        assert exit_code_for(ConfigError("x")) == 2
        assert exit_code_for(DataError("x")) == 3
        assert exit_code_for(PatchflowError("x")) == 5
        assert exit_code_for(RuntimeError("x")) == 1


class TestSeedStreams:
    def test_stable_and_distinct(self):
        assert stream_seed(1, "a", "b") == stream_seed(1, "a", "b")
        assert stream_seed(1, "a") != stream_seed(1, "b")
        assert stream_seed(1, "a") != stream_seed(2, "a")
        r = rng_stream(5, "x")
        s = rng_stream(5, "x")
        assert r.integers(1 << 30) == s.integers(1 << 30)

"""Evaluation pipeline wiring: annotations, reports, mask estimation.

Model quality is the acceptance suite's concern; these tests run the
machinery with untrained weights and check structure and exactness of the
deterministic parts.
"""

import numpy as np
import pytest

from patchflow.bench import (
    EvalReport,
    annotate_edit_case,
    background_plate,
    estimate_object_mask,
    moving_layer_index,
    render_scene,
    run_depth_eval,
    run_nvs_eval,
    sample_scene_spec,
)
from patchflow.bench.evals import _points_from_annotations
from patchflow.bench.scene import _layer_pose
from patchflow.errors import ContractError
from patchflow.geometry import fit_rigid
from patchflow.model import SequenceModel, mini_model_config
from patchflow.quantizer import PatchTokenizer, flow_toy, rgb_toy
from patchflow.recipes import acceptance_layout


@pytest.fixture(scope="module")
def untrained():
    layout = acceptance_layout()
    return {
        "tok_rgb": PatchTokenizer(rgb_toy(), seed=1),
        "tok_flow": PatchTokenizer(flow_toy(), seed=2),
        "model_rgb": SequenceModel(mini_model_config("rgb", layout), layout, seed=3),
        "model_flow": SequenceModel(mini_model_config("flow", layout), layout, seed=4),
    }


class TestEditAnnotations:
    def test_fit_recovers_layer_motion_exactly(self):
        for seed in (3, 17, 92):
            spec = sample_scene_spec("edit", seed)
            scene = render_scene(spec)
            li = moving_layer_index(spec)
            pairs = annotate_edit_case(scene, li, seed=5)
            a, b = _points_from_annotations(pairs, scene.intrinsics)
            fitted = fit_rigid(a, b)
            M0 = _layer_pose(spec.layers[li], 0)
            M1 = _layer_pose(spec.layers[li], 1)
            true = M1.compose(M0.inverse())
            np.testing.assert_allclose(fitted.R, true.R, atol=1e-9)
            np.testing.assert_allclose(fitted.t, true.t, atol=1e-9)

    def test_annotations_spread_and_depths(self):
        spec = sample_scene_spec("edit", 11)
        scene = render_scene(spec)
        li = moving_layer_index(spec)
        pairs = annotate_edit_case(scene, li, n_points=4, seed=1)
        assert len(pairs) == 4
        for rec in pairs:
            assert rec["depth_a"] > 0 and rec["depth_b"] > 0

    def test_annotation_uvb_matches_flow(self):
        spec = sample_scene_spec("edit", 23)
        scene = render_scene(spec)
        li = moving_layer_index(spec)
        pairs = annotate_edit_case(scene, li, seed=2)
        flow = scene.flows[0]
        for rec in pairs:
            c, r = int(rec["uv_a"][0]), int(rec["uv_a"][1])
            expect = [c + flow.flow[r, c, 0], r + flow.flow[r, c, 1]]
            np.testing.assert_allclose(rec["uv_b"], expect, atol=1e-9)


class TestMaskEstimation:
    def test_background_plate_reveals_object(self):
        spec = sample_scene_spec("edit", 31)
        scene = render_scene(spec)
        li = moving_layer_index(spec)
        plate = background_plate(spec, li)
        est = estimate_object_mask(scene.frames[1], plate)
        gt = scene.masks[1][li]
        inter = (est & gt).sum()
        union = (est | gt).sum()
        assert inter / union > 0.8  # near-perfect on clean renders


class TestReports:
    def test_aggregates_recompute(self):
        rep = EvalReport(task="t", config={"a": 1}, seed=0)
        rep.add(x=1.0, y=2.0)
        rep.add(x=3.0, y=4.0)
        assert rep.aggregates == {"x": 2.0, "y": 3.0}
        rep.verify_aggregates(rep.aggregates)
        with pytest.raises(ContractError):
            rep.verify_aggregates({"x": 9.0})

    def test_seed_fields_excluded_from_aggregates(self):
        rep = EvalReport(task="t", config={}, seed=0)
        rep.add(scene_seed=123, x=1.0)
        assert "scene_seed" not in rep.aggregates

    def test_save_and_hash_stable(self, tmp_path):
        rep = EvalReport(task="t", config={"k": 1}, seed=5)
        rep.add(x=1.5)
        h1 = rep.report_hash()
        h2 = rep.report_hash()
        assert h1 == h2
        rep.save(tmp_path / "r.json")
        from patchflow.util import read_json

        data = read_json(tmp_path / "r.json")
        assert data["aggregates"] == {"x": 1.5}
        assert "LPIPS" in data["notes"]


class TestPipelinesWiring:
    def test_nvs_eval_fields(self, untrained):
        rep = run_nvs_eval(untrained["model_rgb"], untrained["tok_rgb"],
                           untrained["tok_flow"], [5, 6], seed=1)
        assert len(rep.samples) == 2
        row = rep.samples[0]
        for key in ("psnr", "ssim", "psnr_copy_input", "psnr_reconstruction_ceiling",
                    "mean_flow_px"):
            assert key in row
        rep.verify_aggregates(rep.aggregates)

    def test_nvs_eval_zero_motion_mode(self, untrained):
        rep = run_nvs_eval(untrained["model_rgb"], untrained["tok_rgb"],
                           untrained["tok_flow"], [5], seed=1, zero_motion=True)
        assert rep.samples[0]["mean_flow_px"] == 0.0

    def test_depth_eval_oracle(self):
        rep = run_depth_eval(None, None, None, [4, 5, 6], oracle_flow=True, seed=2)
        assert rep.aggregates["AbsRel"] < 1e-3
        assert rep.aggregates["delta1"] == 1.0

    def test_nvs_eval_report_deterministic(self, untrained):
        r1 = run_nvs_eval(untrained["model_rgb"], untrained["tok_rgb"],
                          untrained["tok_flow"], [7], seed=3)
        r2 = run_nvs_eval(untrained["model_rgb"], untrained["tok_rgb"],
                          untrained["tok_flow"], [7], seed=3)
        assert r1.report_hash() == r2.report_hash()

"""Binary/file formats: .flo, depth, masks, correspondence annotations."""

import numpy as np
import pytest

from patchflow.errors import DataError
from patchflow.geometry import (
    DepthMap,
    FlowField,
    read_correspondences,
    read_depth_png,
    read_depth_raw,
    read_flo,
    read_image_png,
    read_mask_png,
    write_correspondences,
    write_depth_png,
    write_depth_raw,
    write_flo,
    write_image_png,
    write_mask_png,
)


class TestFlo:
    def test_round_trip_bit_exact(self, tmp_path, rng):
        field = FlowField(rng.standard_normal((12, 17, 2)).astype(np.float32).astype(np.float64))
        p1 = tmp_path / "a.flo"
        p2 = tmp_path / "b.flo"
        write_flo(p1, field)
        again = read_flo(p1)
        write_flo(p2, again)
        assert p1.read_bytes() == p2.read_bytes()
        np.testing.assert_array_equal(
            field.flow.astype(np.float32), again.flow.astype(np.float32)
        )

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "bad.flo"
        p.write_bytes(b"\x00" * 20)
        with pytest.raises(DataError, match="magic"):
            read_flo(p)

    def test_truncated(self, tmp_path, rng):
        field = FlowField(rng.standard_normal((4, 4, 2)))
        p = tmp_path / "t.flo"
        write_flo(p, field)
        p.write_bytes(p.read_bytes()[:-4])
        with pytest.raises(DataError, match="truncated"):
            read_flo(p)

    def test_trailing_bytes(self, tmp_path, rng):
        field = FlowField(rng.standard_normal((4, 4, 2)))
        p = tmp_path / "t.flo"
        write_flo(p, field)
        with open(p, "ab") as f:
            f.write(b"junk")
        with pytest.raises(DataError, match="trailing"):
            read_flo(p)


class TestDepthFiles:
    def test_png_round_trip(self, tmp_path, rng):
        d = DepthMap(rng.uniform(0.5, 5.0, (8, 8)), rng.random((8, 8)) > 0.2)
        p = tmp_path / "d.png"
        write_depth_png(p, d, divisor=1e-3)
        again = read_depth_png(p)
        np.testing.assert_array_equal(again.valid, d.valid)
        np.testing.assert_allclose(again.values[d.valid], d.values[d.valid], atol=5.1e-4)

    def test_png_range_check(self, tmp_path):
        d = DepthMap(np.full((4, 4), 1000.0))
        with pytest.raises(DataError, match="16-bit"):
            write_depth_png(tmp_path / "d.png", d, divisor=1e-3)

    def test_raw_round_trip(self, tmp_path, rng):
        d = DepthMap(rng.uniform(0.5, 5.0, (8, 8)).astype(np.float32).astype(np.float64),
                     rng.random((8, 8)) > 0.2)
        p = tmp_path / "d.f32"
        write_depth_raw(p, d)
        again = read_depth_raw(p)
        np.testing.assert_array_equal(again.valid, d.valid)
        np.testing.assert_array_equal(again.values[d.valid], d.values[d.valid])


class TestMasksAndImages:
    def test_mask_round_trip(self, tmp_path, rng):
        mask = rng.random((16, 16)) > 0.5
        p = tmp_path / "m.png"
        write_mask_png(p, mask)
        np.testing.assert_array_equal(read_mask_png(p), mask)

    def test_image_round_trip_8bit(self, tmp_path, rng):
        img = rng.random((16, 16, 3))
        p = tmp_path / "i.png"
        write_image_png(p, img)
        again = read_image_png(p)
        assert np.abs(again - img).max() < 1.0 / 255.0 + 1e-9


class TestCorrespondences:
    def test_round_trip(self, tmp_path):
        pairs = [
            {"uv_a": (1.0, 2.0), "uv_b": (3.5, 4.25), "depth_a": 2.0, "depth_b": 2.5}
            for _ in range(4)
        ]
        p = tmp_path / "ann.json"
        write_correspondences(p, pairs)
        again = read_correspondences(p)
        assert len(again) == 4
        assert again[0]["uv_b"] == [3.5, 4.25]

    def test_too_few_records(self, tmp_path):
        write_correspondences(tmp_path / "ann.json",
                              [{"uv_a": (0, 0), "uv_b": (0, 0), "depth_a": 1, "depth_b": 1}] * 3)
        with pytest.raises(DataError, match="at least 4"):
            read_correspondences(tmp_path / "ann.json")

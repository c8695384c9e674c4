"""File formats: raw float64 container, Y4M, image sequences, 8-bit export."""

import struct

import numpy as np
import pytest

from tdvid import io as vio
from tdvid.volume import franke_video, psnr


def rng_for(seed):
    return np.random.Generator(np.random.Philox(key=seed))


class TestToUint8:
    def test_clamps_low(self):
        assert vio.to_uint8(np.array([[[-3.2]]]))[0, 0, 0] == 0

    def test_clamps_high(self):
        assert vio.to_uint8(np.array([[[255.7]]]))[0, 0, 0] == 255

    def test_rounds_half_away_from_zero(self):
        vals = np.array([[[0.5, 1.5, 2.4, 2.6]]])
        np.testing.assert_array_equal(vio.to_uint8(vals)[0, 0], [1, 2, 2, 3])

    def test_in_range_values_pass_through(self):
        np.testing.assert_array_equal(vio.to_uint8(np.array([[[0.0, 127.0, 255.0]]]))[0, 0],
                                      [0, 127, 255])


class TestRawF64:
    def test_round_trip_is_bitwise(self, tmp_path):
        v = rng_for(1).standard_normal((3, 5, 6, 4)) * 300.0 - 100.0
        path = tmp_path / "clip.tdvv"
        vio.write_raw_f64(v, path)
        back = vio.read_raw_f64(path)
        np.testing.assert_array_equal(back, v)

    def test_preserves_out_of_range_values(self, tmp_path):
        v = np.full((1, 2, 2, 2), 255.7)
        v[0, 0, 0, 0] = -3.2
        path = tmp_path / "x.tdvv"
        vio.write_raw_f64(v, path)
        back = vio.read_raw_f64(path)
        assert back[0, 0, 0, 0] == -3.2 and back[0, 1, 1, 1] == 255.7

    def test_header_layout(self, tmp_path):
        path = tmp_path / "h.tdvv"
        vio.write_raw_f64(np.zeros((3, 4, 5, 6)), path)
        blob = path.read_bytes()
        assert blob[:4] == b"TDVV"
        version, m, n, t, c = struct.unpack("<5I", blob[4:24])
        assert (version, m, n, t, c) == (1, 4, 5, 6, 3)
        assert len(blob) == 24 + 3 * 4 * 5 * 6 * 8

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.tdvv"
        path.write_bytes(b"NOPE" + b"\0" * 40)
        with pytest.raises(vio.VideoFormatError, match="magic"):
            vio.read_raw_f64(path)

    def test_truncated_payload(self, tmp_path):
        path = tmp_path / "short.tdvv"
        vio.write_raw_f64(np.zeros((1, 4, 4, 4)), path)
        blob = path.read_bytes()
        path.write_bytes(blob[:-8])
        with pytest.raises(vio.VideoFormatError, match="payload"):
            vio.read_raw_f64(path)

    def test_psnr_unchanged_through_round_trip(self, tmp_path):
        clean = franke_video(16, 16, 8)
        v = clean + rng_for(2).standard_normal(clean.shape)
        path = tmp_path / "rt.tdvv"
        vio.write_raw_f64(v, path)
        back = vio.read_raw_f64(path)[0]
        assert psnr(back, clean) == psnr(v, clean)


class TestY4m:
    def make_mono_fixture(self, path, frames):
        t, m, n = len(frames), len(frames[0]), len(frames[0][0])
        with open(path, "wb") as fh:
            fh.write(f"YUV4MPEG2 W{n} H{m} F25:1 Cmono\n".encode())
            for fr in frames:
                fh.write(b"FRAME\n")
                fh.write(bytes(val for row in fr for val in row))

    def test_hand_built_mono_fixture(self, tmp_path):
        path = tmp_path / "f.y4m"
        f0 = [[0, 10, 20, 30], [40, 50, 60, 70], [80, 90, 100, 110], [120, 130, 140, 150]]
        f1 = [[255] * 4 for _ in range(4)]
        self.make_mono_fixture(path, [f0, f1])
        v = vio.read_y4m(path)
        assert v.shape == (1, 4, 4, 2)
        np.testing.assert_array_equal(v[0, :, :, 0], np.array(f0, dtype=np.float64))
        np.testing.assert_array_equal(v[0, :, :, 1], 255.0)

    def test_mono_round_trip(self, tmp_path):
        v = vio.to_uint8(franke_video(6, 8, 3)).astype(np.float64)[None]
        path = tmp_path / "m.y4m"
        vio.write_y4m(v, path)
        np.testing.assert_array_equal(vio.read_y4m(path), v)

    def test_colour_444_round_trip(self, tmp_path):
        v = vio.to_uint8(rng_for(3).uniform(0, 255, (3, 6, 8, 3))).astype(np.float64)
        path = tmp_path / "c.y4m"
        vio.write_y4m(v, path)
        np.testing.assert_array_equal(vio.read_y4m(path), v)

    def test_420_chroma_nearest_upsampled(self, tmp_path):
        path = tmp_path / "s.y4m"
        with open(path, "wb") as fh:
            fh.write(b"YUV4MPEG2 W4 H4 F25:1 C420jpeg\n")
            fh.write(b"FRAME\n")
            fh.write(bytes(range(16)))  # Y
            fh.write(bytes([1, 2, 3, 4]))  # U (2x2)
            fh.write(bytes([5, 6, 7, 8]))  # V (2x2)
        v = vio.read_y4m(path)
        assert v.shape == (3, 4, 4, 1)
        np.testing.assert_array_equal(
            v[1, :, :, 0],
            [[1, 1, 2, 2], [1, 1, 2, 2], [3, 3, 4, 4], [3, 3, 4, 4]],
        )

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.y4m"
        path.write_bytes(b"MPEG4??? W4 H4\nFRAME\n" + b"\0" * 16)
        with pytest.raises(vio.VideoFormatError):
            vio.read_y4m(path)

    def test_truncated_frame(self, tmp_path):
        path = tmp_path / "t.y4m"
        path.write_bytes(b"YUV4MPEG2 W4 H4 Cmono\nFRAME\n" + b"\0" * 10)
        with pytest.raises(vio.VideoFormatError, match="frame 0"):
            vio.read_y4m(path)


class TestImageSequence:
    def test_round_trip_and_ordering(self, tmp_path):
        v = vio.to_uint8(franke_video(6, 6, 10)).astype(np.float64)[None]
        outdir = tmp_path / "seq"
        vio.write_image_sequence(v, outdir)
        files = sorted(p.name for p in outdir.iterdir())
        assert files[0] == "frame_00000.png" and len(files) == 10
        back = vio.read_image_sequence(outdir)
        np.testing.assert_array_equal(back, v)

    def test_numeric_order_not_lexicographic(self, tmp_path):
        from PIL import Image

        d = tmp_path / "seq"
        d.mkdir()
        for idx, name in ((2, "frame_2.png"), (10, "frame_10.png"), (1, "frame_1.png")):
            Image.fromarray(np.full((4, 4), idx, dtype=np.uint8)).save(d / name)
        v = vio.read_image_sequence(d)
        np.testing.assert_array_equal(v[0, 0, 0, :], [1.0, 2.0, 10.0])

    def test_inconsistent_frame_size_names_frame(self, tmp_path):
        from PIL import Image

        d = tmp_path / "seq"
        d.mkdir()
        Image.fromarray(np.zeros((4, 4), dtype=np.uint8)).save(d / "frame_0.png")
        Image.fromarray(np.zeros((5, 4), dtype=np.uint8)).save(d / "frame_1.png")
        with pytest.raises(vio.VideoFormatError, match="frame 1"):
            vio.read_image_sequence(d)

    def test_empty_directory(self, tmp_path):
        d = tmp_path / "seq"
        d.mkdir()
        with pytest.raises(vio.VideoFormatError):
            vio.read_image_sequence(d)


class TestDispatch:
    def test_guess_by_suffix(self, tmp_path):
        v = np.zeros((1, 2, 2, 2))
        path = tmp_path / "a.tdvv"
        vio.write_video(v, path)
        np.testing.assert_array_equal(vio.read_video(path), v)

    def test_unknown_suffix(self, tmp_path):
        with pytest.raises(vio.VideoFormatError):
            vio.read_video(tmp_path / "a.mp4")

    def test_info_reports_written_dimensions(self, tmp_path):
        path = tmp_path / "i.tdvv"
        vio.write_video(np.zeros((3, 4, 5, 6)), path)
        info = vio.video_info(path)
        assert info == {
            "format": "raw-f64",
            "rows": 4,
            "cols": 5,
            "frames": 6,
            "channels": 3,
            "bit_depth": "float64",
        }

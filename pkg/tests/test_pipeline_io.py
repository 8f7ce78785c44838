import numpy as np
import pytest

from pantext.errors import FormatError, ShapeError
from pantext.pipeline.config import PipelineConfig, dump_config, load_config, parse_config
from pantext.pipeline.gt import gt_key, parse_ctw_gt, parse_icdar_gt
from pantext.pipeline.image import decode_ppm, encode_ppm, load_image, prepare_image


class TestConfig:
    def test_defaults(self):
        c = PipelineConfig()
        assert (c.top_n, c.rpn_nms_iou, c.skewed_nms_iou, c.score_threshold) == (2000, 0.7, 0.3, 0.5)

    def test_parse(self):
        c = parse_config("# comment\n\ntop_n = 10\nrpn_nms_iou=0.6\nweights_path = /tmp/w.panw\n")
        assert (c.top_n, c.rpn_nms_iou, c.weights_path) == (10, 0.6, "/tmp/w.panw")

    def test_roundtrip(self):
        c = PipelineConfig(top_n=7, test_scale=512, seed=3, weights_path="a b.panw")
        assert parse_config(dump_config(c)) == c

    @pytest.mark.parametrize("text,line", [("top_n = 5\nbogus = 1\n", 2), ("top_n = five\n", 1), ("\n\njunk\n", 3)])
    def test_errors_carry_line(self, text, line):
        with pytest.raises(FormatError) as exc:
            parse_config(text, path="c.cfg")
        assert exc.value.line == line and f"c.cfg:{line}:" in str(exc.value)

    @pytest.mark.parametrize("kw", [{"skewed_nms_iou": 1.5}, {"top_n": -1}, {"test_scale": 0}, {"threads": 0}])
    def test_invariants(self, kw):
        with pytest.raises(ValueError):
            PipelineConfig(**kw)

    def test_out_of_range_in_file(self):
        with pytest.raises(FormatError):
            parse_config("eval_iou = 2\n")

    def test_load(self, tmp_path):
        p = tmp_path / "c.cfg"
        p.write_text("test_scale = 96\n")
        assert load_config(p).test_scale == 96


class TestIcdarGt:
    def test_basic(self):
        (item,) = parse_icdar_gt(b"0,0,10,0,10,5,0,5,hello\n")
        assert item.points.tolist() == [[0, 0], [10, 0], [10, 5], [0, 5]]
        assert (item.text, item.ignore) == ("hello", False)

    def test_dont_care(self):
        assert parse_icdar_gt(b"0,0,10,0,10,5,0,5,###").pop().ignore

    def test_empty(self):
        assert parse_icdar_gt(b"") == []

    def test_bom_crlf_and_commas(self):
        data = "﻿1,2,3,4,5,6,7,8,a,b\r\n\r\n9,9,19,9,19,19,9,19,x\r\n".encode("utf-8")
        items = parse_icdar_gt(data)
        assert [i.text for i in items] == ["a,b", "x"]

    @pytest.mark.parametrize("data,line", [(b"0,0,1,0\n", 1), (b"0,0,1,0,1,1,0,1,a\n0,0,1,x,1,1,0,1,b\n", 2)])
    def test_malformed(self, data, line):
        with pytest.raises(FormatError) as exc:
            parse_icdar_gt(data, path="gt_1.txt")
        assert exc.value.line == line

    def test_not_utf8(self):
        with pytest.raises(FormatError):
            parse_icdar_gt(b"\xff\xfe0,0")


class TestCtwGt:
    LINE = ",".join(str(v) for v in range(28))

    def test_fourteen_points(self):
        (item,) = parse_ctw_gt((self.LINE + ",word\n").encode())
        assert item.points.shape == (14, 2) and item.points[13].tolist() == [26, 27] and item.text == "word"

    def test_27_ints(self):
        with pytest.raises(FormatError) as exc:
            parse_ctw_gt(",".join(["1"] * 27).encode())
        assert exc.value.line == 1

    def test_blank_lines_and_floats(self):
        assert len(parse_ctw_gt(f"\n{self.LINE}\n\n".encode())) == 1
        with pytest.raises(FormatError):
            parse_ctw_gt(("1.5," + ",".join(["1"] * 27)).encode())


def test_gt_key():
    assert gt_key("dir/gt_img_12.txt") == "img_12"
    assert gt_key("0001.txt") == "0001"


class TestImage:
    def test_white_2x2(self):
        rgb, maxval = decode_ppm(encode_ppm(np.full((2, 2, 3), 255, np.uint8)))
        img = prepare_image(rgb, 2, maxval)
        assert np.all(img.tensor[:, :, :2, :2] == 1.0)

    def test_no_resize_when_shorter_side_matches(self):
        img = prepare_image(np.zeros((512, 1024, 3), np.uint8), 512)
        assert img.resized_size == (512, 1024) and img.tensor.shape == (1, 3, 512, 1024)
        assert img.scale == (1.0, 1.0) and img.padding == (0, 0)

    def test_padding(self):
        img = prepare_image(np.full((20, 30, 3), 128, np.uint8), 20)
        assert img.tensor.shape == (1, 3, 32, 32) and img.padding == (12, 2)
        assert np.all(img.tensor[:, :, 20:, :] == 0) and np.all(img.tensor[:, :, :, 30:] == 0)

    def test_resize_scale(self):
        img = prepare_image(np.zeros((30, 60, 3), np.uint8), 64)
        assert img.resized_size == (64, 128) and img.scale == (64 / 30, 128 / 60)

    def test_header_comments_and_maxval(self):
        data = b"P6\n# made by hand\n2 1\n15\n" + bytes([15, 0, 0, 0, 15, 0])
        rgb, maxval = decode_ppm(data)
        img = prepare_image(rgb, 1, maxval)
        assert img.tensor[0, 0, 0, 0] == 1.0 and img.tensor[0, 1, 0, 1] == 1.0

    @pytest.mark.parametrize("data,needle", [(b"\x89PNG\r\n", "PNG"), (b"P3\n1 1\n255\n0 0 0", "P3"),
                                             (b"P6\n2 2\n255\n\x00", "truncated"), (b"P6\n2 2\n65535\n", "8-bit")])
    def test_rejects(self, data, needle):
        with pytest.raises(FormatError, match=needle):
            decode_ppm(data)

    def test_prepare_requires_rgb(self):
        with pytest.raises(ShapeError):
            prepare_image(np.zeros((8, 8, 1), np.uint8), 8)

    def test_load(self, fixture_ppm, fixture_rgb):
        img = load_image(fixture_ppm, 64)
        assert img.orig_size == fixture_rgb.shape[:2]
        np.testing.assert_allclose(img.tensor[0, :, :64, :80], fixture_rgb.transpose(2, 0, 1) / 255)

    def test_load_bad_file_names_path(self, tmp_path):
        p = tmp_path / "x.ppm"
        p.write_bytes(b"GIF89a")
        with pytest.raises(FormatError, match="x.ppm"):
            load_image(p, 32)

import cv2
import numpy as np
import pytest

from src.errors import LoadError, ParseError
from src.rasters import (read_image, read_mask, read_raster, read_raw, write_image, write_labels,
                         write_png, write_raw)


class TestPng:
    def test_write_and_read_linear(self, tmp_path, rng):
        img = rng.uniform(0.0, 1.0, size=(6, 9, 3))
        path = write_png(tmp_path / "img.png", img, normalize=False)
        back = read_image(path, "identity")
        assert back.shape == img.shape
        np.testing.assert_allclose(back, img, atol=1.0 / 65535)

    def test_channel_order_is_rgb(self, tmp_path):
        img = np.zeros((2, 2, 3))
        img[..., 0] = 1.0
        back = read_image(write_png(tmp_path / "red.png", img, normalize=False), "identity")
        assert np.all(back[..., 0] == 1.0)
        assert np.all(back[..., 2] == 0.0)

    def test_normalize_scales_by_peak(self, tmp_path):
        img = np.full((2, 2, 3), 0.25)
        back = read_image(write_png(tmp_path / "n.png", img, normalize=True), "identity")
        np.testing.assert_allclose(back, 1.0)

    def test_gray_8bit_replicated(self, tmp_path):
        gray = np.array([[0, 128], [255, 64]], dtype=np.uint8)
        cv2.imwrite(str(tmp_path / "gray.png"), gray)
        raster = read_raster(tmp_path / "gray.png")
        assert raster.shape == (2, 2, 3)
        assert np.all(raster[..., 0] == raster[..., 2])

    def test_rgba_drops_alpha(self, tmp_path):
        bgra = np.zeros((2, 2, 4), dtype=np.uint8)
        bgra[..., 2] = 200
        bgra[..., 3] = 10
        cv2.imwrite(str(tmp_path / "rgba.png"), bgra)
        raster = read_raster(tmp_path / "rgba.png")
        assert raster.shape == (2, 2, 3)
        assert np.all(raster[..., 0] == 200)

    def test_mask_from_png(self, tmp_path):
        mask = np.array([[0, 255], [255, 0]], dtype=np.uint8)
        cv2.imwrite(str(tmp_path / "mask.png"), mask)
        np.testing.assert_array_equal(read_mask(tmp_path / "mask.png"), mask > 0)

    def test_missing_file(self, tmp_path):
        with pytest.raises(LoadError):
            read_image(tmp_path / "nada.png")

    def test_undecodable_file(self, tmp_path):
        path = tmp_path / "roto.png"
        path.write_bytes(b"no es un png")
        with pytest.raises(LoadError):
            read_raster(path)

    def test_labels_keep_indices(self, tmp_path):
        labels = np.array([[0, 1, 2], [300, 4, 5]])
        write_labels(tmp_path / "labels.png", labels)
        raw = cv2.imread(str(tmp_path / "labels.png"), cv2.IMREAD_UNCHANGED)
        np.testing.assert_array_equal(raw, labels)


class TestRaw:
    def test_lossless_float32(self, tmp_path, rng):
        img = rng.uniform(0.0, 5.0, size=(4, 5, 3)).astype(np.float32).astype(np.float64)
        back = read_raw(write_raw(tmp_path / "img.iidf", img))
        np.testing.assert_array_equal(back, img)

    def test_scalar_field(self, tmp_path):
        field = np.arange(6, dtype=np.float64).reshape(2, 3)
        assert read_raw(write_raw(tmp_path / "f.iidf", field)).shape == (2, 3)

    def test_dispatch_by_suffix(self, tmp_path):
        img = np.full((2, 2, 3), 3.5)
        path = write_image(tmp_path / "img.iidf", img)
        np.testing.assert_array_equal(read_image(path), img)

    def test_header_layout(self, tmp_path):
        path = write_raw(tmp_path / "h.iidf", np.zeros((2, 7, 3)))
        payload = path.read_bytes()
        assert payload[:4] == b"IIDF"
        assert int.from_bytes(payload[4:8], "little") == 7
        assert int.from_bytes(payload[8:12], "little") == 2
        assert int.from_bytes(payload[12:16], "little") == 3
        assert len(payload) == 16 + 2 * 7 * 3 * 4

    def test_bad_magic(self, tmp_path):
        path = write_raw(tmp_path / "m.iidf", np.zeros((1, 1, 3)))
        path.write_bytes(b"XXXX" + path.read_bytes()[4:])
        with pytest.raises(ParseError):
            read_raw(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "t.iidf"
        path.write_bytes(b"IIDF\x01")
        with pytest.raises(ParseError):
            read_raw(path)

    def test_truncated_data(self, tmp_path):
        path = write_raw(tmp_path / "d.iidf", np.zeros((2, 2, 3)))
        path.write_bytes(path.read_bytes()[:-4])
        with pytest.raises(ParseError) as excinfo:
            read_raw(path)
        assert excinfo.value.location is not None

import numpy as np
import pytest

from src.errors import InvalidInputError
from src.evaluation import lmse
from src.imgcore import gaussian_blur, recompose
from src.params import RetinexParams
from src.retinex import (ccr_mask, fuse_or, log_gradients, poisson_reconstruct, retinex_classify,
                         retinex_decompose)

from .conftest import COLOR_A, COLOR_B, constant_image, split_image

SMALL = RetinexParams(t_brightness=1e-3, t_chroma=1e-3)


class TestLogGradients:
    def test_shapes(self, rng):
        grad = log_gradients(rng.uniform(0.1, 1.0, size=(5, 7, 3)))
        assert grad.dx.shape == (5, 6, 3)
        assert grad.dy.shape == (4, 7, 3)
        assert grad.brightness_x.shape == (5, 6)
        assert grad.chroma_y.shape == (4, 7)
        assert (grad.brightness_x >= 0).all() and (grad.chroma_x >= 0).all()

    def test_forward_differences_of_log(self):
        img = constant_image(2, 3)
        img[:, 2] *= np.e
        grad = log_gradients(img)
        np.testing.assert_allclose(grad.dx[:, 1], 1.0)
        np.testing.assert_allclose(grad.dx[:, 0], 0.0)


class TestRetinexClassify:
    def test_constant_image(self):
        mask_x, mask_y = retinex_classify(constant_image(6, 6), SMALL)
        assert not mask_x.any() and not mask_y.any()

    def test_shading_ramp_on_constant_color(self):
        ramp = np.linspace(0.2, 1.0, 12)[None, :, None] * np.ones((6, 12, 3))
        mask_x, mask_y = retinex_classify(ramp * np.array([0.5, 0.3, 0.2]), RetinexParams())
        assert not mask_x.any() and not mask_y.any()

    def test_edge_with_brightness_and_chroma_change(self):
        img = split_image(4, 8, left=(0.4, 0.2, 0.1), right=(0.2, 0.4, 0.8))
        mask_x, mask_y = retinex_classify(img, SMALL)
        np.testing.assert_array_equal(np.flatnonzero(mask_x.any(axis=0)), [3])
        assert not mask_y.any()

    def test_equal_brightness_edge_needs_ratios(self):
        # Ambos colores tienen el mismo log medio: solo cambia la cromaticidad
        img = split_image(4, 8)
        mask_x, _ = retinex_classify(img, SMALL)
        assert not mask_x.any()
        ccr_x, _ = ccr_mask(img, RetinexParams(sigma=0.01))
        assert ccr_x[:, 3].all()
        assert fuse_or(mask_x, ccr_x)[:, 3].all()


class TestCcrMask:
    def test_constant_image(self):
        mask_x, mask_y = ccr_mask(constant_image(5, 5))
        assert not mask_x.any() and not mask_y.any()

    def test_invariant_to_shading(self):
        img = split_image(16, 20, boundary=9)
        shaded = img * np.linspace(0.3, 1.0, 16)[:, None, None]
        for plain, lit in zip(ccr_mask(img), ccr_mask(shaded)):
            np.testing.assert_array_equal(plain, lit)

    def test_aligned_with_gradients(self, rng):
        img = rng.uniform(0.1, 1.0, size=(6, 9, 3))
        grad = log_gradients(img)
        mask_x, mask_y = ccr_mask(img)
        assert mask_x.shape == grad.dx.shape[:2]
        assert mask_y.shape == grad.dy.shape[:2]


class TestFuseOr:
    def test_truth_table(self):
        a = np.array([0, 1, 0, 1], dtype=bool)
        b = np.array([0, 0, 1, 1], dtype=bool)
        np.testing.assert_array_equal(fuse_or(a, b), [False, True, True, True])

    def test_identity_and_idempotence(self, rng):
        b = rng.uniform(size=(4, 5)) > 0.5
        np.testing.assert_array_equal(fuse_or(np.zeros_like(b), b), b)
        np.testing.assert_array_equal(fuse_or(b, b), b)

    def test_superset_of_inputs(self, rng):
        a = rng.uniform(size=(6, 6)) > 0.5
        b = rng.uniform(size=(6, 6)) > 0.5
        fused = fuse_or(a, b)
        assert np.all(fused[a]) and np.all(fused[b])

    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            fuse_or(np.zeros((2, 2), bool), np.zeros((2, 3), bool))


class TestPoissonReconstruct:
    def test_full_keep_round_trip(self, rng):
        noise = gaussian_blur(rng.normal(size=(64, 64, 3)), 2.0)
        ys, xs = np.mgrid[0:64, 0:64]
        img = np.exp(noise + 0.02 * (xs - ys)[..., None] - 1.0)
        grad = log_gradients(img)
        keep = (np.ones(grad.dx.shape[:2], bool), np.ones(grad.dy.shape[:2], bool))
        result = poisson_reconstruct(grad, keep)
        for c in range(3):
            recovered = result.log_image[..., c] - result.log_image[..., c].mean()
            expected = grad.log_image[..., c] - grad.log_image[..., c].mean()
            assert np.abs(recovered - expected).max() < 1e-5

    def test_empty_keep_is_gauge_constant(self, rng):
        img = rng.uniform(0.1, 1.0, size=(8, 9, 3))
        grad = log_gradients(img)
        keep = (np.zeros(grad.dx.shape[:2], bool), np.zeros(grad.dy.shape[:2], bool))
        result = poisson_reconstruct(grad, keep)
        for c in range(3):
            np.testing.assert_allclose(result.log_image[..., c], grad.log_image[..., c].mean(), atol=1e-9)
        assert not result.degraded

    def test_seam_only_keep_is_two_level(self):
        img = split_image(10, 12, left=(0.6, 0.3, 0.2), right=(0.2, 0.3, 0.6), boundary=5)
        img *= np.linspace(0.4, 1.0, 10)[:, None, None]
        grad = log_gradients(img)
        keep_x = np.zeros(grad.dx.shape[:2], bool)
        keep_x[:, 4] = True
        result = poisson_reconstruct(grad, (keep_x, np.zeros(grad.dy.shape[:2], bool)))
        for c in range(3):
            channel = result.log_image[..., c]
            np.testing.assert_allclose(channel[:, :5], channel[0, 0], atol=1e-6)
            np.testing.assert_allclose(channel[:, 5:], channel[0, 5], atol=1e-6)
            jump = np.log(img[0, 5, c] / img[0, 4, c])
            assert channel[0, 5] - channel[0, 0] == pytest.approx(jump, abs=1e-6)

    def test_mask_shape_mismatch(self, rng):
        grad = log_gradients(rng.uniform(0.1, 1.0, size=(4, 4, 3)))
        with pytest.raises(InvalidInputError):
            poisson_reconstruct(grad, (np.ones((4, 4), bool), np.ones((3, 4), bool)))


class TestRetinexDecompose:
    def test_shaded_constant_color(self, smooth_shading):
        img = smooth_shading[..., None] * np.array([0.5, 0.35, 0.15])
        result = retinex_decompose(img, RetinexParams())
        r = result.reflectance
        assert (r.max(axis=(0, 1)) - r.min(axis=(0, 1)) <= 0.02 * r.mean(axis=(0, 1))).all()
        np.testing.assert_allclose(recompose(r, result.shading), img, atol=1e-6)

    def test_ratios_recover_equal_brightness_edge(self):
        img = split_image(12, 16)
        with_ccr = retinex_decompose(img, RetinexParams(), use_ccr=True)
        without = retinex_decompose(img, RetinexParams(), use_ccr=False)
        assert lmse(with_ccr.reflectance, img) < 1e-4
        assert lmse(with_ccr.reflectance, img) < lmse(without.reflectance, img)

    def test_reconstruction_identity(self, rng):
        img = rng.uniform(0.0, 1.0, size=(10, 12, 3))
        result = retinex_decompose(img)
        visible = img > 1e-3
        np.testing.assert_allclose(recompose(result.reflectance, result.shading)[visible], img[visible], atol=1e-6)

    def test_info_carries_masks(self, rng):
        result = retinex_decompose(rng.uniform(0.1, 1.0, size=(5, 6, 3)))
        assert result.info["keep_x"].shape == (5, 5)
        assert result.info["keep_y"].shape == (4, 6)
        assert result.info["residual"] >= 0

    def test_shadow_edge_left_out_of_keep_mask(self):
        reflectance = split_image(16, 40, boundary=28)
        shadow = np.ones((16, 40))
        shadow[4:12, 4:14] = 0.25
        img = reflectance * gaussian_blur(shadow, 1.5)[..., None]
        assert log_gradients(img).brightness_x[:, :24].max() > 0.075

        with_ccr = retinex_decompose(img, RetinexParams(), use_ccr=True)
        without = retinex_decompose(img, RetinexParams(), use_ccr=False)
        assert not with_ccr.info["keep_x"][:, :24].any()
        assert not with_ccr.info["keep_y"][:, :24].any()
        assert with_ccr.info["keep_x"][:, 27].all()
        assert lmse(with_ccr.reflectance, reflectance) <= lmse(without.reflectance, reflectance)

import itertools
import math

import numpy as np
import pytest
from scipy.ndimage import uniform_filter

from src.clustering import ClusterModel, build_features, kmeans, label_colors
from src.config import load_pipeline_config
from src.crf import (CrfParams, EnergyBreakdown, LabelState, decompose, energy_breakdown, guided_filter,
                     minimize, pairwise_energy, pairwise_features, shading_prior_energy,
                     shading_smoothness_energy, soften, state_from_labels, unify_materials)
from src.dense_kernel import GaussianKernel
from src.errors import InvalidInputError, InvalidParameterError
from src.imgcore import recompose
from src.params import ClusterParams, GuidedFilterParams, PipelineConfig
from src.ratios import material_regions
from src.synth import make_scene

from .conftest import constant_image, split_image

BRIGHT = (0.8, 0.4, 0.2)
DARK = (0.1, 0.2, 0.4)


def partition_model(assignment) -> ClusterModel:
    assignment = np.asarray(assignment, dtype=np.int64).ravel()
    k = int(assignment.max()) + 1
    return ClusterModel(k=k, centers=np.zeros((k, 3)), assignment=assignment, seed=0)


class TestPairwiseFeatures:
    def test_constant_image(self):
        feats = pairwise_features(constant_image(4, 5))
        assert feats.shape == (20, 6)
        np.testing.assert_allclose(feats[:, 2:], feats[0, 2:][None, :].repeat(20, axis=0))

    def test_neutral_ratio_has_full_affinity(self):
        feats = pairwise_features(constant_image(3, 3), CrfParams(theta_ratio=0.5))
        np.testing.assert_allclose(feats[:, 5], 1.0 / 0.5)

    def test_ratio_weight_at_fused_two(self):
        # m1·m2·m3 = e^6 contra el vecino derecho: valor fusionado 2
        img = np.array([[[1.0, 1.0, math.exp(-3.0)], [1.0, 1.0, 1.0]]])
        feats = pairwise_features(img, CrfParams(theta_ratio=0.5, ratio_sigma=0.01))
        assert feats[0, 5] == pytest.approx(math.exp(-2.0) / 0.5, rel=1e-9)
        assert feats[1, 5] == pytest.approx(1.0 / 0.5)

    def test_without_ratio_feature(self):
        assert pairwise_features(constant_image(2, 2), CrfParams(use_ratio_feature=False)).shape == (4, 5)

    def test_position_bandwidth(self):
        feats = pairwise_features(constant_image(5, 10), CrfParams(use_ratio_feature=False))
        assert feats[1, 0] - feats[0, 0] == pytest.approx(1.0 / (0.1 * 10))


class TestPairwiseEnergy:
    def _state(self, hard, k=2):
        hard = np.asarray(hard)
        return state_from_labels(np.ones((1, len(hard), 3)), hard, np.ones((k, 3)))

    def test_single_label(self, rng):
        feats = rng.normal(size=(6, 3))
        assert pairwise_energy(self._state([0] * 6), feats) == 0.0

    def test_identical_features(self):
        assert pairwise_energy(self._state([0, 1]), np.zeros((2, 2))) == pytest.approx(1.0)

    def test_distance_two(self):
        feats = np.array([[0.0], [2.0]])
        assert pairwise_energy(self._state([0, 1]), feats) == pytest.approx(math.exp(-2.0))
        assert math.exp(-2.0) == pytest.approx(0.1353, abs=1e-4)

    def test_feature_count_mismatch(self):
        with pytest.raises(InvalidInputError):
            pairwise_energy(self._state([0, 1]), np.zeros((3, 2)))


class TestShadingSmoothnessEnergy:
    def test_constant_image_single_label(self):
        img = constant_image(4, 4)
        state = state_from_labels(img, np.zeros(16, int), img[:1, 0])
        assert shading_smoothness_energy(img, state) == pytest.approx(0.0, abs=1e-20)

    def test_correct_partition_is_zero(self):
        img = split_image(4, 6, BRIGHT, DARK, boundary=3)
        hard = np.tile([0, 0, 0, 1, 1, 1], 4)
        state = state_from_labels(img, hard, [BRIGHT, DARK])
        assert shading_smoothness_energy(img, state) == pytest.approx(0.0, abs=1e-20)

    def test_single_label_penalizes_seam(self):
        img = split_image(4, 6, BRIGHT, DARK, boundary=3)
        state = state_from_labels(img, np.zeros(24, int), [BRIGHT])
        assert shading_smoothness_energy(img, state) == pytest.approx(4 * math.log(2.0) ** 2)


class TestShadingPriorEnergy:
    def _one_pixel(self, log_s):
        img = np.full((1, 1, 3), 0.5 * math.exp(log_s))
        return img, state_from_labels(img, [0], [(0.5, 0.5, 0.5)])

    def test_inside_range(self):
        assert shading_prior_energy(*self._one_pixel(1.0), (-2.5, 2.5)) == 0.0

    def test_below_range(self):
        assert shading_prior_energy(*self._one_pixel(-3.5), (-2.5, 2.5)) == pytest.approx(1.0)

    def test_above_range(self):
        assert shading_prior_energy(*self._one_pixel(3.0), (-2.5, 2.5)) == pytest.approx(0.25)

    def test_empty_range(self):
        with pytest.raises(InvalidParameterError):
            shading_prior_energy(*self._one_pixel(0.0), (1.0, 1.0))


class TestEnergyBreakdown:
    def test_linear_in_weights(self, rng):
        img = rng.uniform(0.05, 1.0, size=(5, 5, 3))
        state = state_from_labels(img, rng.integers(0, 3, size=25), rng.uniform(0.1, 1.0, size=(3, 3)))
        kernel = GaussianKernel(pairwise_features(img))
        base = energy_breakdown(img, state, CrfParams(), kernel)
        for w_p, w_s, w_l in [(0.0, 0.0, 0.0), (2.0, 0.1, 5.0), (0.3, 7.0, 0.0)]:
            params = CrfParams(w_p=w_p, w_s=w_s, w_l=w_l)
            energy = energy_breakdown(img, state, params, kernel)
            assert (energy.e_pairwise, energy.e_smooth, energy.e_prior) == \
                (base.e_pairwise, base.e_smooth, base.e_prior)
            expected = w_p * base.e_pairwise + w_s * base.e_smooth + w_l * base.e_prior
            assert energy.e_total == pytest.approx(expected, abs=1e-9)

    def test_to_dict(self):
        energy = EnergyBreakdown.combine(1.0, 2.0, 3.0, CrfParams(w_p=1.0, w_s=1.0, w_l=1.0))
        assert energy.to_dict() == {"e_pairwise": 1.0, "e_smooth": 2.0, "e_prior": 3.0, "e_total": 6.0}


def exhaustive_optimum(img, assignment, params: CrfParams) -> float:
    """Mínimo de la energía sobre todos los etiquetados de k = 2"""
    height, width, _ = img.shape
    labels = label_colors(img, assignment, 2)
    kernel = GaussianKernel(pairwise_features(img, params))
    best = math.inf
    for bits in itertools.product((0, 1), repeat=height * width):
        hard = np.array(bits)
        state = LabelState(labels=labels, q=soften(hard, 2), hard=hard, shape=(height, width))
        best = min(best, energy_breakdown(img, state, params, kernel).e_total)
    return best


class TestMinimize:
    def test_two_color_partition(self):
        img = split_image(4, 4, BRIGHT, DARK, boundary=2)
        init = kmeans(build_features(img), 2, seed=0)
        state, _ = minimize(img, init)
        hard = state.hard_map()
        assert len(np.unique(hard[:, :2])) == 1 and len(np.unique(hard[:, 2:])) == 1
        assert hard[0, 0] != hard[0, 3]

    def test_repairs_flipped_pixel(self):
        img = split_image(4, 4, BRIGHT, DARK, boundary=2)
        assignment = np.tile([0, 0, 1, 1], 4)
        assignment[0] = 1
        state, energy = minimize(img, partition_model(assignment))
        np.testing.assert_array_equal(state.hard_map()[:, :2], 0)
        np.testing.assert_array_equal(state.hard_map()[:, 2:], 1)
        assert energy.e_total < state.history[0].e_total

    @pytest.mark.parametrize("seed", range(50))
    def test_matches_exhaustive_optimum(self, seed):
        rng = np.random.default_rng(seed)
        img = rng.uniform(0.05, 1.0, size=(3, 3, 3))
        init = kmeans(build_features(img), 2, seed=seed)
        params = CrfParams()
        state, energy = minimize(img, init, params)
        optimum = exhaustive_optimum(img, init.assignment, params)
        assert energy.e_total >= optimum - 1e-9
        assert energy.e_total <= optimum + 0.05 * abs(optimum) + 1e-12
        assert energy.e_total <= state.history[0].e_total

    def test_zero_weights_keep_initialization(self, rng):
        img = rng.uniform(0.05, 1.0, size=(6, 6, 3))
        init = kmeans(build_features(img), 3, seed=0)
        state, energy = minimize(img, init, CrfParams(w_p=0.0, w_s=0.0, w_l=0.0))
        np.testing.assert_array_equal(state.hard, init.assignment)
        assert energy.e_total == 0.0

    def test_never_worse_than_initialization(self, rng):
        img = rng.uniform(0.05, 1.0, size=(20, 20, 3))
        init = kmeans(build_features(img), 4, seed=1)
        state, energy = minimize(img, init, CrfParams(iterations=5))
        assert len(state.history) == 6
        assert energy.e_total <= state.history[0].e_total

    def test_empty_model(self):
        model = ClusterModel(k=0, centers=np.zeros((0, 3)), assignment=np.zeros(4, int), seed=0)
        with pytest.raises(InvalidInputError):
            minimize(constant_image(2, 2), model)

    def test_assignment_size_mismatch(self):
        with pytest.raises(InvalidInputError):
            minimize(constant_image(2, 2), partition_model([0, 1, 0]))


class TestUnifyMaterials:
    def test_shadow_joins_lit_label(self):
        img = split_image(8, 12, BRIGHT, DARK)
        img[5:, :6] *= 0.25
        hard = np.full((8, 12), 2)
        hard[:, :6] = 0
        hard[5:, :6] = 1

        unified, k, n_regions = unify_materials(img, hard.ravel(), 3)
        assert (n_regions, k) == (2, 3)
        expected = np.where(np.arange(12) < 6, 0, 2)[None, :].repeat(8, axis=0)
        np.testing.assert_array_equal(unified.reshape(8, 12), expected)

    def test_shared_label_split_by_material(self):
        img = split_image(8, 12, BRIGHT, DARK, boundary=7)
        unified, k, _ = unify_materials(img, np.zeros(96, dtype=int), 1, min_pixels=32)
        assert k == 2
        expected = np.where(np.arange(12) < 7, 0, 1)[None, :].repeat(8, axis=0)
        np.testing.assert_array_equal(unified.reshape(8, 12), expected)

    def test_small_regions_keep_label(self):
        img = split_image(8, 12, BRIGHT, DARK, boundary=7)
        unified, k, _ = unify_materials(img, np.zeros(96, dtype=int), 1, min_pixels=48)
        assert k == 1
        assert not unified.any()

    def test_size_mismatch(self):
        with pytest.raises(InvalidInputError):
            unify_materials(constant_image(2, 2), np.zeros(3, dtype=int), 1)


class TestGuidedFilter:
    def test_constant_unchanged(self):
        img = constant_image(12, 12)
        np.testing.assert_allclose(guided_filter(img, img, radius=3), img, atol=1e-12)

    def test_large_eps_is_box_smoothing(self, rng):
        target = rng.uniform(size=(20, 24))
        guide = rng.uniform(size=(20, 24, 3))
        size = 2 * 2 + 1
        expected = uniform_filter(uniform_filter(target, size, mode="nearest"), size, mode="nearest")
        np.testing.assert_allclose(guided_filter(target, guide, radius=2, eps=1e6), expected, atol=1e-5)

    def test_noise_reduced_away_from_edge(self, rng):
        target = 0.5 + rng.normal(0.0, 0.05, size=(48, 64))
        guide = np.where(np.arange(64) < 32, 0.2, 0.8)[None, :].repeat(48, axis=0)
        out = guided_filter(target, guide, radius=8, eps=1e-3)
        far = np.r_[0:14, 50:64]
        assert out[:, far].var() < target[:, far].var() / 2

    def test_edge_location_preserved(self):
        step = np.where(np.arange(40) < 20, 0.2, 0.8)[None, :].repeat(30, axis=0)
        out = guided_filter(step, step, radius=8, eps=1e-3)
        strongest = int(np.argmax(np.abs(np.diff(out[15]))))
        assert abs(strongest - 19) <= 1

    def test_invalid_parameters(self):
        img = constant_image(4, 4)
        with pytest.raises(InvalidParameterError):
            guided_filter(img, img, radius=0)
        with pytest.raises(InvalidParameterError):
            guided_filter(img, img, eps=0.0)


class TestDecompose:
    def test_shaded_constant_color(self):
        shading = np.linspace(0.4, 1.0, 16)[None, :] * np.linspace(0.8, 1.0, 12)[:, None]
        img = shading[..., None] * np.array([0.6, 0.4, 0.3])
        decomposition, energy = decompose(img, PipelineConfig(clustering=ClusterParams(k="auto", use_ratios=False)))
        r = decomposition.reflectance
        assert (r.max(axis=(0, 1)) - r.min(axis=(0, 1)) <= 0.02 * r.mean(axis=(0, 1))).all()
        assert energy is not None

    def test_reconstruction_identity(self, rng):
        img = rng.uniform(0.0, 1.0, size=(10, 12, 3))
        decomposition, _ = decompose(img)
        visible = img > 1e-3
        recomposed = recompose(decomposition.reflectance, decomposition.shading)
        np.testing.assert_allclose(recomposed[visible], img[visible], atol=1e-6)

    def test_info_and_labels(self):
        img = split_image(6, 8, BRIGHT, DARK)
        decomposition, energy = decompose(img, PipelineConfig(clustering=ClusterParams(k=2)))
        assert decomposition.labels.shape == (6, 8)
        assert decomposition.info["k"] == 2
        assert decomposition.info["energy"]["e_total"] == energy.e_total
        assert len(decomposition.info["history"]) == CrfParams().iterations + 1

    def test_guided_filter_keeps_floor(self, rng):
        img = rng.uniform(0.0, 1.0, size=(12, 12, 3))
        cfg = PipelineConfig(guided_filter=GuidedFilterParams(enabled=True, radius=2))
        decomposition, _ = decompose(img, cfg)
        assert decomposition.reflectance.min() >= 1e-4

    def test_material_regions_carry_one_reflectance(self):
        scene = make_scene(24, 20, 3, "mixed", seed=2)
        cfg = load_pipeline_config(method="final", overrides={"crf": {"iterations": 3}})
        decomposition, _ = decompose(scene.image, cfg)

        n_regions, regions = material_regions(scene.image)
        assert decomposition.info["regions"] == n_regions
        for region in range(n_regions):
            values = decomposition.reflectance[regions == region]
            assert np.ptp(values, axis=0).max() == 0.0

    def test_material_step_needs_ratio_term(self):
        cfg = load_pipeline_config(method="default", overrides={"clustering": {"k": 2}})
        decomposition, _ = decompose(split_image(6, 8, BRIGHT, DARK), cfg)
        assert decomposition.info["regions"] is None
        assert decomposition.info["k_final"] == 2

    def test_retinex_pipeline(self, rng):
        img = rng.uniform(0.05, 1.0, size=(8, 8, 3))
        decomposition, energy = decompose(img, PipelineConfig(pipeline="retinex"))
        assert energy is None
        assert decomposition.reflectance.shape == img.shape

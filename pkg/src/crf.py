"""
CRF denso sobre el conjunto de etiquetas del clustering.

    E(x) = w_p E_p(x) + w_s E_s(x) + w_l E_l(x)

E_p: Potts con kernel gaussiano sobre (posición, intensidad, cromaticidad
[, peso gaussiano de la razón cruzada fusionada]).
E_s: suavidad del log-sombreado entre 4-vecinos.
E_l: bisagra cuadrática del log-sombreado fuera de [lo, hi].

La minimización es mean-field con doble buffer, seguida de un refinamiento
exacto por swaps en imágenes pequeñas. Nunca se devuelve un etiquetado con
más energía que la inicialización.

Con el término de razones activo, decompose impone además que cada región de
material (4-vecinos con razones cruzadas neutras) lleve una sola etiqueta.
"""

import logging
from dataclasses import asdict, dataclass, field

import cv2
import numpy as np

from .clustering import ClusterModel, cluster_image, label_colors
from .dense_kernel import GaussianKernel
from .errors import InvalidInputError, InvalidParameterError
from .graphcut import SwapRefiner
from .imgcore import (SHADING_EPS, Decomposition, as_linear_image, chromaticity,
                      estimate_shading, mean_channel)
from .params import CrfParams, GuidedFilterParams, PipelineConfig
from .ratios import MATERIAL_TOL, cross_ratio_magnitude, material_regions, ratio_field
from .retinex import retinex_decompose

logger = logging.getLogger(__name__)

SOFT_ONEHOT = 0.9

__all__ = [
    "CrfParams", "LabelState", "EnergyBreakdown", "pairwise_features", "pairwise_energy",
    "shading_smoothness_energy", "shading_prior_energy", "energy_breakdown", "minimize",
    "unify_materials", "estimate_shading", "guided_filter", "decompose",
]


@dataclass
class EnergyBreakdown:
    e_pairwise: float
    e_smooth: float
    e_prior: float
    e_total: float

    @classmethod
    def combine(cls, e_pairwise: float, e_smooth: float, e_prior: float, params: CrfParams) -> "EnergyBreakdown":
        total = params.w_p * e_pairwise + params.w_s * e_smooth + params.w_l * e_prior
        return cls(float(e_pairwise), float(e_smooth), float(e_prior), float(total))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LabelState:
    """Colores candidatos (k×3), distribución q (N×k) y argmax duro (N)"""
    labels: np.ndarray
    q: np.ndarray
    hard: np.ndarray
    shape: tuple
    history: list = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.labels.shape[0]

    def hard_map(self) -> np.ndarray:
        return self.hard.reshape(self.shape)


def soften(hard: np.ndarray, k: int) -> np.ndarray:
    """0.9 one-hot + 0.1 uniforme"""
    return SOFT_ONEHOT * np.eye(k)[hard] + (1.0 - SOFT_ONEHOT) / k


def state_from_labels(img, hard, labels) -> LabelState:
    img = np.asarray(img)
    labels = np.asarray(labels, dtype=np.float64)
    hard = np.asarray(hard, dtype=np.int64).ravel()
    return LabelState(labels=labels, q=soften(hard, labels.shape[0]), hard=hard, shape=img.shape[:2])


def pairwise_features(img, params: CrfParams | None = None) -> np.ndarray:
    """
    (x/θpos, y/θpos, I/θint, cr/θchroma, cg/θchroma [, exp(-f²/2)/θratio]) por píxel.
    """
    params = params or CrfParams()
    img = as_linear_image(img)
    height, width, _ = img.shape
    theta_pos = params.resolved_theta_pos(height, width)

    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    intensity, chroma_r, chroma_g = chromaticity(img)
    columns = [
        xs / theta_pos,
        ys / theta_pos,
        intensity / params.theta_int,
        chroma_r / params.theta_chroma,
        chroma_g / params.theta_chroma,
    ]
    if params.use_ratio_feature:
        fused = ratio_field(img, sigma=params.ratio_sigma).fused
        columns.append(np.exp(-0.5 * fused ** 2) / params.theta_ratio)

    return np.stack([c.ravel() for c in columns], axis=1)


def log_shading_table(img, labels) -> np.ndarray:
    """log s_il = log(mean I_i) - log(mean c_l), ambos acotados por debajo"""
    intensity = np.maximum(mean_channel(img).ravel(), SHADING_EPS)
    label_mean = np.maximum(np.asarray(labels, dtype=np.float64).mean(axis=1), SHADING_EPS)
    return np.log(intensity)[:, None] - np.log(label_mean)[None, :]


def grid_edges(height: int, width: int) -> np.ndarray:
    """Pares de 4-vecinos (i, j) con i < j en índices row-major"""
    index = np.arange(height * width).reshape(height, width)
    right = np.stack([index[:, :-1].ravel(), index[:, 1:].ravel()], axis=1)
    down = np.stack([index[:-1, :].ravel(), index[1:, :].ravel()], axis=1)
    return np.vstack([right, down])


def _hinge_sq(values, log_range) -> np.ndarray:
    lo, hi = log_range
    gap = np.maximum(np.maximum(lo - values, values - hi), 0.0)
    return gap * gap


def _hard_log_shading(img, state: LabelState) -> np.ndarray:
    table = log_shading_table(img, state.labels)
    return table[np.arange(table.shape[0]), state.hard]


def pairwise_energy(state: LabelState, feats: np.ndarray, kernel: GaussianKernel | None = None) -> float:
    """sum_{i<j} exp(-||f_i - f_j||²/2) [h_i != h_j]"""
    feats = np.asarray(feats, dtype=np.float64)
    if feats.shape[0] != state.hard.size:
        raise InvalidInputError(f"{feats.shape[0]} vectores de características para {state.hard.size} píxeles")
    kernel = kernel or GaussianKernel(feats)
    return kernel.potts_energy(state.hard, state.k)


def shading_smoothness_energy(img, state: LabelState) -> float:
    """sum sobre 4-vecinos de (log s_i - log s_j)²"""
    img = as_linear_image(img)
    height, width, _ = img.shape
    s = _hard_log_shading(img, state)
    edges = grid_edges(height, width)
    diff = s[edges[:, 0]] - s[edges[:, 1]]
    return float(np.sum(diff * diff))


def shading_prior_energy(img, state: LabelState, log_range: tuple = (-2.5, 2.5)) -> float:
    """Bisagra cuadrática del log-sombreado fuera de [lo, hi]"""
    lo, hi = log_range
    if not lo < hi:
        raise InvalidParameterError(f"Se requiere lo < hi, recibido {log_range}")
    img = as_linear_image(img)
    return float(np.sum(_hinge_sq(_hard_log_shading(img, state), (lo, hi))))


def energy_breakdown(img, state: LabelState, params: CrfParams, kernel: GaussianKernel) -> EnergyBreakdown:
    return EnergyBreakdown.combine(
        kernel.potts_energy(state.hard, state.k),
        shading_smoothness_energy(img, state),
        shading_prior_energy(img, state, params.shading_log_range),
        params,
    )


def _kernel(img: np.ndarray, params: CrfParams) -> GaussianKernel:
    feats = pairwise_features(img, params)
    return GaussianKernel(feats, params.max_exact_pixels, params.n_anchors, params.seed)


def _neighbor_moments(values: np.ndarray):
    """Número de 4-vecinos, suma y suma de cuadrados de sus valores"""
    padded = np.pad(values, 1)
    valid = np.pad(np.ones_like(values), 1)
    count = np.zeros_like(values)
    s1 = np.zeros_like(values)
    s2 = np.zeros_like(values)
    for dy, dx in ((-1, 0), (1, 0), (0, -1), (0, 1)):
        window = (slice(1 + dy, padded.shape[0] - 1 + dy), slice(1 + dx, padded.shape[1] - 1 + dx))
        v = padded[window]
        m = valid[window]
        count += m
        s1 += v * m
        s2 += v * v * m
    return count, s1, s2


def minimize(img, init: ClusterModel, params: CrfParams | None = None):
    """
    Inferencia mean-field desde las asignaciones del clustering.

    Devuelve (LabelState, EnergyBreakdown) del etiquetado duro de menor energía
    visto; la inicialización solo se reemplaza con energía estrictamente menor.
    """
    params = params or CrfParams()
    img = as_linear_image(img)
    height, width, _ = img.shape
    n = height * width
    if init.k == 0:
        raise InvalidInputError("El modelo de clusters no tiene etiquetas (k = 0)")
    if init.assignment.size != n:
        raise InvalidInputError(f"La asignación cubre {init.assignment.size} píxeles, la imagen tiene {n}")

    # Colores candidatos y costos unarios fijos
    k = init.k
    labels = label_colors(img, init.assignment, k)
    table = log_shading_table(img, labels)
    prior_cost = params.w_l * _hinge_sq(table, params.shading_log_range)
    kernel = _kernel(img, params)

    def evaluate(hard):
        state = LabelState(labels=labels, q=soften(hard, k), hard=hard, shape=(height, width))
        return energy_breakdown(img, state, params, kernel)

    # Estado inicial desde el clustering
    hard = init.assignment.astype(np.int64).copy()
    q = soften(hard, k)
    best_hard, best_q = hard, q
    best_energy = evaluate(hard)
    history = [best_energy]
    logger.info(f"CRF: energía inicial {best_energy.e_total:.6f} (k = {k}, {n} píxeles)")

    for iteration in range(params.iterations):
        # Todas las actualizaciones leen q de la iteración t
        expected = (q * table).sum(axis=1).reshape(height, width)
        count, s1, s2 = _neighbor_moments(expected)
        smooth_cost = params.w_s * (count.reshape(-1, 1) * table ** 2
                                    - 2.0 * table * s1.reshape(-1, 1)
                                    + s2.reshape(-1, 1))
        msg = kernel.message(q)
        potts_cost = params.w_p * (msg.sum(axis=1, keepdims=True) - msg)

        cost = potts_cost + smooth_cost + prior_cost
        logits = -(cost - cost.min(axis=1, keepdims=True))
        q_next = np.exp(logits)
        q_next /= q_next.sum(axis=1, keepdims=True)

        # Energía exacta del etiquetado duro
        hard_next = np.argmax(q_next, axis=1)
        energy = evaluate(hard_next)
        history.append(energy)
        logger.debug(f"CRF iteración {iteration + 1}: energía {energy.e_total:.6f}")

        if energy.e_total < best_energy.e_total - 1e-12:
            best_hard, best_q, best_energy = hard_next, q_next, energy
        q = q_next

    # Refinamiento exacto por swaps en imágenes pequeñas
    if kernel.exact and n <= params.graphcut_max_pixels and k > 1:
        refiner = SwapRefiner(kernel.matrix, table, grid_edges(height, width),
                              params.w_p, params.w_s, params.w_l, params.shading_log_range,
                              lambda h: evaluate(h).e_total)
        refined, refined_total = refiner.refine(best_hard)
        if refined_total < best_energy.e_total - 1e-12:
            best_hard = refined
            best_q = soften(refined, k)
            best_energy = evaluate(refined)

    logger.info(f"CRF: energía final {best_energy.e_total:.6f}")
    state = LabelState(labels=labels, q=best_q, hard=best_hard, shape=(height, width), history=history)
    return state, best_energy


def _majority_labels(regions: np.ndarray, hard: np.ndarray, n_regions: int, k: int) -> np.ndarray:
    """Etiqueta más frecuente de cada región; los empates van a la de menor índice"""
    keys, counts = np.unique(regions * k + hard, return_counts=True)
    key_region, key_label = np.divmod(keys, k)
    order = np.lexsort((key_label, -counts, key_region))
    key_region, key_label = key_region[order], key_label[order]
    first = np.ones(order.size, dtype=bool)
    first[1:] = key_region[1:] != key_region[:-1]
    majority = np.empty(n_regions, dtype=np.int64)
    majority[key_region[first]] = key_label[first]
    return majority


def unify_materials(img, hard, k: int, tol: float = MATERIAL_TOL, min_pixels: int = 32):
    """
    Restricción de material sobre un etiquetado duro.

    Los 4-vecinos con razones cruzadas neutras son el mismo material aunque
    una sombra o el sombreado los separe en intensidad. Cada región conexa de
    ese tipo adopta su etiqueta mayoritaria. Si una etiqueta queda repartida
    entre regiones de materiales distintos, cada grupo adicional de regiones
    con al menos min_pixels píxeles pasa a una etiqueta nueva.

    Devuelve (etiquetado N, k resultante, número de regiones).
    """
    img = as_linear_image(img)
    hard = np.asarray(hard, dtype=np.int64).ravel()
    if hard.size != img.shape[0] * img.shape[1]:
        raise InvalidInputError(f"El etiquetado cubre {hard.size} píxeles, la imagen tiene "
                                f"{img.shape[0] * img.shape[1]}")
    if min_pixels < 1:
        raise InvalidParameterError(f"min_pixels debe ser >= 1, recibido {min_pixels}")

    n_regions, regions = material_regions(img, tol)
    regions = regions.ravel().astype(np.int64)
    region_label = _majority_labels(regions, hard, n_regions, k)

    sizes = np.bincount(regions, minlength=n_regions)
    pixels = img.reshape(-1, 3)
    colors = np.stack([np.bincount(regions, weights=pixels[:, c], minlength=n_regions)
                       for c in range(3)], axis=1) / sizes[:, None]

    # Solo las regiones grandes pueden abrir una etiqueta nueva
    next_label = k
    large = np.flatnonzero(sizes >= min_pixels)
    for label in np.unique(region_label[large]):
        members = large[region_label[large] == label]
        members = members[np.argsort(-sizes[members], kind="stable")]
        groups = []
        for region in members:
            for representative, group in groups:
                if cross_ratio_magnitude(colors[representative], colors[region]) <= tol:
                    group.append(region)
                    break
            else:
                groups.append((region, [region]))
        for _, group in groups[1:]:
            region_label[group] = next_label
            next_label += 1

    if next_label > k:
        logger.info(f"Restricción de material: {next_label - k} etiquetas nuevas para materiales mezclados")
    return region_label[regions], next_label, n_regions


def _box(img: np.ndarray, radius: int) -> np.ndarray:
    size = 2 * radius + 1
    return cv2.boxFilter(img, cv2.CV_64F, (size, size), normalize=True, borderType=cv2.BORDER_REPLICATE)


def guided_filter(target, guide, radius: int = 8, eps: float = 1e-3) -> np.ndarray:
    """Filtro guiado con guía en escala de grises (media de canales), por canal del mapa"""
    if radius < 1:
        raise InvalidParameterError(f"radius debe ser >= 1, recibido {radius}")
    if eps <= 0:
        raise InvalidParameterError(f"eps debe ser > 0, recibido {eps}")
    target = np.asarray(target, dtype=np.float64)
    guide = np.asarray(guide, dtype=np.float64)
    if guide.ndim == 3:
        guide = guide.mean(axis=2)
    if guide.shape != target.shape[:2]:
        raise InvalidInputError(f"Guía {guide.shape} y mapa {target.shape[:2]} con dimensiones distintas")

    mean_i = _box(guide, radius)
    var_i = _box(guide * guide, radius) - mean_i * mean_i

    channels = target[..., None] if target.ndim == 2 else target
    out = np.empty_like(channels)
    for c in range(channels.shape[2]):
        p = np.ascontiguousarray(channels[..., c])
        mean_p = _box(p, radius)
        cov_ip = _box(guide * p, radius) - mean_i * mean_p
        a = cov_ip / (var_i + eps)
        b = mean_p - a * mean_i
        out[..., c] = _box(a, radius) * guide + _box(b, radius)
    return out[..., 0] if target.ndim == 2 else out


def postprocess(img, reflectance, params: GuidedFilterParams) -> np.ndarray:
    filtered = guided_filter(reflectance, img, params.radius, params.eps)
    return np.maximum(filtered, SHADING_EPS)


def decompose(img, cfg: PipelineConfig | None = None):
    """
    Pipeline completo sobre una LinearImage (la linealización ocurre al cargar):
    clustering -> CRF -> restricción de material -> reflectancia por etiqueta ->
    sombreado -> filtro guiado opcional.

    La restricción de material corre con el término de razones del CRF
    (use_ratio_feature y material_regions); la energía devuelta es entonces
    la del etiquetado final.

    Devuelve (Decomposition, EnergyBreakdown | None); el pipeline Retinex no tiene energía.
    """
    cfg = cfg or PipelineConfig()
    img = as_linear_image(img)

    if cfg.pipeline == "retinex":
        result = retinex_decompose(img, cfg.retinex)
        reflectance = np.maximum(result.reflectance, SHADING_EPS)
        if cfg.guided_filter.enabled:
            reflectance = postprocess(img, reflectance, cfg.guided_filter)
        result.reflectance = reflectance
        result.shading = estimate_shading(img, reflectance)
        return result, None

    # Clustering e inferencia
    _, model = cluster_image(img, cfg.clustering)
    state, energy = minimize(img, model, cfg.crf)

    # Restricción de material y energía del etiquetado resultante
    n_regions = None
    if cfg.crf.use_ratio_feature and cfg.crf.material_regions:
        hard, k, n_regions = unify_materials(img, state.hard, state.k,
                                             cfg.crf.material_tol, cfg.crf.material_min_pixels)
        state = LabelState(labels=label_colors(img, hard, k), q=soften(hard, k), hard=hard,
                           shape=state.shape, history=state.history)
        energy = energy_breakdown(img, state, cfg.crf, _kernel(img, cfg.crf))
        logger.info(f"Restricción de material: {n_regions} regiones, k = {k}, "
                    f"energía {energy.e_total:.6f}")

    # Reflectancia por etiqueta y sombreado
    hard = state.hard
    colors = label_colors(img, hard, state.k)
    reflectance = np.maximum(colors[hard].reshape(img.shape), SHADING_EPS)
    if cfg.guided_filter.enabled:
        reflectance = postprocess(img, reflectance, cfg.guided_filter)
    shading = estimate_shading(img, reflectance)

    decomposition = Decomposition(
        reflectance=reflectance,
        shading=shading,
        labels=state.hard_map(),
        info={
            "k": int(model.k),
            "k_final": int(state.k),
            "regions": n_regions,
            "history": [e.to_dict() for e in state.history],
            "energy": energy.to_dict(),
        },
    )
    return decomposition, energy

"""
Razones de color simples (F) y cruzadas (M) entre píxeles vecinos.

Las cruzadas son invariantes a la iluminación y a la geometría:
    M1 = (R1 G2) / (R2 G1), M2 = (R1 B2) / (R2 B1), M3 = (G1 B2) / (G2 B1)
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .errors import InvalidParameterError
from .imgcore import as_linear_image, gaussian_blur

logger = logging.getLogger(__name__)

RATIO_EPS = 1e-4
DEFAULT_THRESHOLD = 0.02
MATERIAL_TOL = 0.05
K_MIN = 2
K_MAX = 50
NEUTRAL = (1.0, 1.0, 1.0)


@dataclass(frozen=True)
class RatioTriple:
    m1: float
    m2: float
    m3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.m1, self.m2, self.m3], dtype=np.float64)


@dataclass
class RatioField:
    """Tripletes contra el vecino derecho e inferior y el mapa fusionado"""
    horizontal: np.ndarray
    vertical: np.ndarray
    fused_horizontal: np.ndarray
    fused_vertical: np.ndarray
    fused: np.ndarray

    @property
    def shape(self) -> tuple:
        return self.fused.shape


def _clamp(p) -> np.ndarray:
    return np.maximum(np.asarray(p, dtype=np.float64), RATIO_EPS)


def single_ratio_array(p1, p2) -> np.ndarray:
    """F por canal para arreglos (..., 3)"""
    return _clamp(p1) / _clamp(p2)


def cross_ratio_array(p1, p2) -> np.ndarray:
    """M1, M2, M3 para arreglos (..., 3)"""
    a = _clamp(p1)
    b = _clamp(p2)
    r1, g1, b1 = a[..., 0], a[..., 1], a[..., 2]
    r2, g2, b2 = b[..., 0], b[..., 1], b[..., 2]
    return np.stack([
        (r1 * g2) / (r2 * g1),
        (r1 * b2) / (r2 * b1),
        (g1 * b2) / (g2 * b1),
    ], axis=-1)


def single_ratios(p1, p2) -> RatioTriple:
    return RatioTriple(*single_ratio_array(p1, p2).tolist())


def cross_ratios(p1, p2) -> RatioTriple:
    return RatioTriple(*cross_ratio_array(p1, p2).tolist())


def _triples(t) -> np.ndarray:
    return t.as_array() if isinstance(t, RatioTriple) else np.asarray(t, dtype=np.float64)


def fuse_geometric_mean(t):
    """|log m1 + log m2 + log m3| / 3: magnitud logarítmica de la media geométrica"""
    logs = np.log(_triples(t))
    fused = np.abs(logs.sum(axis=-1)) / 3.0
    return float(fused) if np.ndim(fused) == 0 else fused


def fuse_arithmetic_mean(t):
    """Alternativa en espacio RGB; simétrica ante tripletes recíprocos"""
    arr = _triples(t)
    forward = np.abs(arr.mean(axis=-1) - 1.0)
    backward = np.abs((1.0 / arr).mean(axis=-1) - 1.0)
    fused = np.maximum(forward, backward)
    return float(fused) if np.ndim(fused) == 0 else fused


def fuse_single(t):
    """Solo la razón rojo-verde M1"""
    fused = np.abs(np.log(_triples(t)[..., 0]))
    return float(fused) if np.ndim(fused) == 0 else fused


FUSIONS = {
    "geometric": fuse_geometric_mean,
    "arithmetic": fuse_arithmetic_mean,
    "m1": fuse_single,
}


def _neighbor_triples(img: np.ndarray, ratio_fn):
    height, width, _ = img.shape
    horizontal = np.ones((height, width, 3))
    vertical = np.ones((height, width, 3))
    if width > 1:
        horizontal[:, :-1] = ratio_fn(img[:, :-1], img[:, 1:])
    if height > 1:
        vertical[:-1, :] = ratio_fn(img[:-1, :], img[1:, :])
    return horizontal, vertical


def _build_field(img, sigma: float, fusion: str, ratio_fn) -> RatioField:
    if fusion not in FUSIONS:
        raise InvalidParameterError(f"Fusión desconocida: {fusion!r} (opciones: {', '.join(FUSIONS)})")
    img = as_linear_image(img)
    blurred = gaussian_blur(img, sigma)
    horizontal, vertical = _neighbor_triples(blurred, ratio_fn)
    fuse = FUSIONS[fusion]
    fused_h = fuse(horizontal)
    fused_v = fuse(vertical)
    return RatioField(
        horizontal=horizontal,
        vertical=vertical,
        fused_horizontal=fused_h,
        fused_vertical=fused_v,
        fused=np.maximum(fused_h, fused_v),
    )


def ratio_field(img, sigma: float = 1.0, fusion: str = "geometric") -> RatioField:
    """Suaviza, calcula M contra los vecinos derecho e inferior y fusiona"""
    return _build_field(img, sigma, fusion, cross_ratio_array)


def single_ratio_field(img, sigma: float = 1.0, fusion: str = "geometric") -> RatioField:
    return _build_field(img, sigma, fusion, single_ratio_array)


def significance_mask(field: RatioField, threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
    """Píxel marcado si su valor fusionado supera estrictamente el umbral"""
    if threshold < 0:
        raise InvalidParameterError(f"threshold debe ser >= 0, recibido {threshold}")
    return field.fused > threshold


def directional_masks(field: RatioField, threshold: float = DEFAULT_THRESHOLD):
    """Máscaras por eje alineadas con las diferencias hacia adelante: H×(W-1) y (H-1)×W"""
    if threshold < 0:
        raise InvalidParameterError(f"threshold debe ser >= 0, recibido {threshold}")
    mask_x = field.fused_horizontal[:, :-1] > threshold
    mask_y = field.fused_vertical[:-1, :] > threshold
    return mask_x, mask_y


def cross_ratio_magnitude(p1, p2) -> np.ndarray:
    """max_c |log M_c|: 0 si los dos colores solo difieren en intensidad"""
    return np.abs(np.log(cross_ratio_array(p1, p2))).max(axis=-1)


def neighbor_ratio_magnitudes(img):
    """
    cross_ratio_magnitude sin suavizar contra el vecino derecho, H×(W-1), y
    contra el inferior, (H-1)×W.
    """
    img = as_linear_image(img)
    return (cross_ratio_magnitude(img[:, :-1], img[:, 1:]),
            cross_ratio_magnitude(img[:-1, :], img[1:, :]))


def material_regions(img, tol: float = MATERIAL_TOL):
    """
    Componentes conexas del grafo de 4-vecinos cuyas razones cruzadas son
    neutras (magnitud <= tol). Sombreado y sombras no cortan una región; un
    cambio de material sí.

    Devuelve (número de regiones, mapa H×W de índices de región).
    """
    if tol < 0:
        raise InvalidParameterError(f"tol debe ser >= 0, recibido {tol}")
    img = as_linear_image(img)
    height, width, _ = img.shape
    n = height * width
    index = np.arange(n).reshape(height, width)
    horizontal, vertical = neighbor_ratio_magnitudes(img)

    join_h = horizontal <= tol
    join_v = vertical <= tol
    rows = np.concatenate([index[:, :-1][join_h], index[:-1, :][join_v]])
    cols = np.concatenate([index[:, 1:][join_h], index[1:, :][join_v]])
    graph = sparse.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))

    count, regions = connected_components(graph, directed=False)
    logger.debug(f"Regiones de material: {count} para {n} píxeles (tol {tol})")
    return int(count), regions.reshape(height, width)


def round_half_away(values) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    return np.sign(values) * np.floor(np.abs(values) + 0.5)


def pixel_triples(img) -> np.ndarray:
    """
    Triplete M de cada píxel contra su vecino derecho; la última columna usa
    el vecino inferior y la esquina inferior derecha queda neutra.
    """
    img = as_linear_image(img)
    height, width, _ = img.shape
    triples = np.ones((height, width, 3))
    if width > 1:
        triples[:, :-1] = cross_ratio_array(img[:, :-1], img[:, 1:])
    if height > 1:
        triples[:-1, -1] = cross_ratio_array(img[:-1, -1], img[1:, -1])
    return triples


def count_distinct_colors(img, k_max: int = K_MAX) -> int:
    """Número de tripletes redondeados únicos, acotado a [2, k_max]"""
    if k_max < K_MIN:
        raise InvalidParameterError(f"k_max debe ser >= {K_MIN}, recibido {k_max}")
    rounded = round_half_away(pixel_triples(img)).reshape(-1, 3)
    unique = np.unique(rounded, axis=0)
    count = int(min(max(len(unique), K_MIN), k_max))
    logger.debug(f"Tripletes redondeados únicos: {len(unique)} -> k = {count}")
    return count

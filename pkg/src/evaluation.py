"""
Métricas de error y resúmenes de tendencia central.

LMSE: ventanas de lado 20 con paso 10; en cada ventana se aplica la escala
óptima antes del error cuadrático; errores sumados y normalizados por la
energía de la referencia; promedio por canal.
WHDR: desacuerdo ponderado con juicios humanos de "más oscuro / igual".
"""

import logging
from dataclasses import asdict, dataclass

import numpy as np

from .errors import InvalidInputError, InvalidParameterError

logger = logging.getLogger(__name__)

LMSE_WINDOW = 20
WHDR_DELTA = 0.10
DARKER_A = "A"
DARKER_B = "B"
EQUAL = "EQUAL"
RELATIONS = (DARKER_A, DARKER_B, EQUAL)


@dataclass(frozen=True)
class Judgment:
    point_a: tuple
    point_b: tuple
    darker: str
    weight: float

    def __post_init__(self):
        if self.darker not in RELATIONS:
            raise InvalidInputError(f"Relación desconocida: {self.darker!r}")
        for point in (self.point_a, self.point_b):
            if len(point) != 2 or not all(0.0 <= v <= 1.0 for v in point):
                raise InvalidInputError(f"Coordenadas fuera del cuadrado unidad: {point}")
        if not np.isfinite(self.weight) or self.weight <= 0:
            raise InvalidInputError(f"Peso inválido: {self.weight}")


@dataclass
class MetricSummary:
    mean: float
    median: float
    trimean: float

    def to_dict(self) -> dict:
        return asdict(self)


def _as_channels(img) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    return arr[..., None] if arr.ndim == 2 else arr


def _window_starts(size: int, window: int) -> list:
    if size <= window:
        return [0]
    return list(range(0, size - window + 1, window // 2))


def lmse(pred, gt, window: int = LMSE_WINDOW, mask=None) -> float:
    """LMSE local invariante a escala; 0 es perfecto"""
    pred = _as_channels(pred)
    gt = _as_channels(gt)
    if pred.shape != gt.shape:
        raise InvalidInputError(f"Dimensiones distintas: predicción {pred.shape}, referencia {gt.shape}")
    if window < 2:
        raise InvalidParameterError(f"window debe ser >= 2, recibido {window}")
    if mask is not None:
        mask = np.asarray(mask, dtype=np.float64)
        if mask.shape != pred.shape[:2]:
            raise InvalidInputError(f"Máscara {mask.shape} no coincide con {pred.shape[:2]}")
        pred = pred * mask[..., None]
        gt = gt * mask[..., None]

    height, width, channels = pred.shape
    rows = _window_starts(height, window)
    cols = _window_starts(width, window)

    scores = []
    for c in range(channels):
        error_sum = 0.0
        energy_sum = 0.0
        for y in rows:
            for x in cols:
                p = pred[y:y + window, x:x + window, c]
                g = gt[y:y + window, x:x + window, c]
                pp = np.sum(p * p)
                alpha = np.sum(g * p) / pp if pp > 0 else 0.0
                error_sum += np.sum((g - alpha * p) ** 2)
                energy_sum += np.sum(g * g)
        scores.append(error_sum / energy_sum if energy_sum > 0 else 0.0)
    return float(np.mean(scores))


def masked_lmse(pred, gt, mask, window: int = LMSE_WINDOW) -> float:
    """LMSE restringido a los píxeles del objeto (convención de las máscaras MIT)"""
    return lmse(pred, gt, window=window, mask=mask)


def _lookup(luminance: np.ndarray, point: tuple) -> float:
    rows, cols = luminance.shape
    x, y = point
    row = min(int(y * rows), rows - 1)
    col = min(int(x * cols), cols - 1)
    return max(1e-10, float(luminance[row, col]))


def predicted_relation(l_a: float, l_b: float, delta: float = WHDR_DELTA) -> str:
    ratio = l_a / l_b
    if ratio < 1.0 / (1.0 + delta):
        return DARKER_A
    if ratio > 1.0 + delta:
        return DARKER_B
    return EQUAL


def whdr(pred_reflectance, judgments, delta: float = WHDR_DELTA) -> float:
    """Tasa de desacuerdo humano ponderada sobre el canal medio de la reflectancia"""
    judgments = list(judgments)
    if not judgments:
        raise InvalidInputError("No hay juicios para evaluar WHDR")
    luminance = np.asarray(pred_reflectance, dtype=np.float64)
    if luminance.ndim == 3:
        luminance = luminance.mean(axis=2)

    error_sum = 0.0
    weight_sum = 0.0
    for judgment in judgments:
        relation = predicted_relation(_lookup(luminance, judgment.point_a),
                                      _lookup(luminance, judgment.point_b), delta)
        if relation != judgment.darker:
            error_sum += judgment.weight
        weight_sum += judgment.weight
    return error_sum / weight_sum


def central_tendency(values) -> MetricSummary:
    """Media, mediana y trimedia (Q1 + 2 Q2 + Q3) / 4 con cuartiles por interpolación lineal"""
    arr = np.asarray(list(values), dtype=np.float64)
    if arr.size == 0:
        raise InvalidInputError("No hay valores para resumir")
    q1, q2, q3 = np.percentile(arr, [25, 50, 75])
    return MetricSummary(
        mean=float(arr.mean()),
        median=float(np.median(arr)),
        trimean=float((q1 + 2 * q2 + q3) / 4),
    )


def shadow_consistency(pred_shadow, pred_free, mask=None, window: int = LMSE_WINDOW) -> float:
    """
    LMSE entre la reflectancia estimada con sombra y sin sombra, dentro de la
    máscara de sombra si existe. 0 significa que la sombra no dejó rastro.
    """
    return lmse(pred_shadow, pred_free, window=window, mask=mask)

"""
Clustering de píxeles para inicializar las etiquetas de reflectancia.

Características: (intensidad, chroma_r, chroma_g) y opcionalmente las tres
razones cruzadas contra el vecino derecho, normalizadas por su máximo y
ponderadas (0.5 estilo MIT, 10 estilo IIW). El número de clusters puede fijarse
o tomarse del conteo de colores distintos de las razones.
"""

import logging
from dataclasses import dataclass

import numpy as np
from sklearn.cluster import KMeans

from .errors import InvalidParameterError
from .imgcore import as_linear_image, pixel_features
from .params import ClusterParams
from .ratios import K_MAX, count_distinct_colors, pixel_triples

logger = logging.getLogger(__name__)


@dataclass
class FeatureMatrix:
    rows: np.ndarray
    height: int
    width: int
    ratio_weight: float = 0.0
    use_ratios: bool = False

    @property
    def n(self) -> int:
        return self.rows.shape[0]

    @property
    def dim(self) -> int:
        return self.rows.shape[1]


@dataclass
class ClusterModel:
    k: int
    centers: np.ndarray
    assignment: np.ndarray
    seed: int
    objective: float = 0.0
    n_iter: int = 0


def build_features(img, use_ratios: bool = False, ratio_weight: float = 0.5) -> FeatureMatrix:
    """Filas por píxel en orden row-major; dimensión 3 o 6"""
    if ratio_weight < 0:
        raise InvalidParameterError(f"ratio_weight debe ser >= 0, recibido {ratio_weight}")
    img = as_linear_image(img)
    height, width, _ = img.shape
    rows = pixel_features(img)

    if use_ratios:
        triples = pixel_triples(img).reshape(-1, 3)
        # Máximo por columna en toda la imagen; los tripletes son >= 1e-8
        normalized = triples / triples.max(axis=0)
        rows = np.hstack([rows, ratio_weight * normalized])

    return FeatureMatrix(rows=rows, height=height, width=width,
                         ratio_weight=float(ratio_weight), use_ratios=use_ratios)


def adaptive_k(img, k_max: int = K_MAX) -> int:
    """k a partir del número de razones de color distintas"""
    return count_distinct_colors(img, k_max=k_max)


def kmeans_objective(feats: FeatureMatrix, model: ClusterModel) -> float:
    diff = feats.rows - model.centers[model.assignment]
    return float(np.sum(diff * diff))


def kmeans(feats: FeatureMatrix, k: int, seed: int = 0, max_iter: int = 300, tol: float = 1e-6) -> ClusterModel:
    """
    k-means++ con semilla fija y iteraciones de Lloyd.

    Los clusters vacíos se re-siembran con el punto más lejano (comportamiento
    de scikit-learn). Al final cada centro se recalcula como la media de sus filas.

    tol es la tolerancia relativa de scikit-learn: se multiplica por la varianza
    media de las columnas y se compara con el desplazamiento cuadrático total
    de los centros entre dos iteraciones.
    """
    if k < 1:
        raise InvalidParameterError(f"k debe ser >= 1, recibido {k}")
    if k > feats.n:
        raise InvalidParameterError(f"k = {k} supera el número de puntos ({feats.n})")

    estimator = KMeans(
        n_clusters=k,
        init="k-means++",
        n_init=1,
        max_iter=max_iter,
        tol=tol,
        random_state=seed,
        algorithm="lloyd",
    )
    assignment = estimator.fit_predict(feats.rows).astype(np.int64)
    centers = estimator.cluster_centers_.astype(np.float64).copy()

    counts = np.bincount(assignment, minlength=k)
    for label in np.flatnonzero(counts):
        centers[label] = feats.rows[assignment == label].mean(axis=0)

    model = ClusterModel(k=k, centers=centers, assignment=assignment, seed=seed,
                         n_iter=int(estimator.n_iter_))
    model.objective = kmeans_objective(feats, model)
    return model


def label_colors(img, labels: np.ndarray, k: int) -> np.ndarray:
    """Color RGB medio de cada etiqueta (k×3); etiquetas sin miembros quedan en 0"""
    pixels = np.asarray(img, dtype=np.float64).reshape(-1, 3)
    labels = np.asarray(labels).ravel()
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    sums = np.stack([np.bincount(labels, weights=pixels[:, c], minlength=k) for c in range(3)], axis=1)
    return np.divide(sums, counts[:, None], out=np.zeros_like(sums), where=counts[:, None] > 0)


def labels_to_reflectance(img, model: ClusterModel) -> np.ndarray:
    """Cada píxel toma el RGB lineal medio de los miembros de su cluster"""
    img = as_linear_image(img)
    colors = label_colors(img, model.assignment, model.k)
    return colors[model.assignment].reshape(img.shape)


def cluster_image(img, params: ClusterParams | None = None):
    """Paso del pipeline: características, k fijo o adaptativo y k-means"""
    params = params or ClusterParams()
    img = as_linear_image(img)
    feats = build_features(img, params.use_ratios, params.ratio_weight)

    k = adaptive_k(img, params.k_max) if params.adaptive else int(params.k)
    if k > feats.n:
        logger.warning(f"k = {k} supera los {feats.n} píxeles; se usa k = {feats.n}")
        k = feats.n

    model = kmeans(feats, k, seed=params.seed, max_iter=params.max_iter, tol=params.tol)
    logger.info(f"k-means: k = {k} ({'adaptativo' if params.adaptive else 'fijo'}), "
                f"objetivo {model.objective:.4f}, {model.n_iter} iteraciones")
    return feats, model

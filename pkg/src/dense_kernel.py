"""
Suma directa del kernel gaussiano k_ij = exp(-||f_i - f_j||^2 / 2) del CRF denso.

Hasta max_exact_pixels se evalúa la matriz completa. Por encima se usa una
submuestra de anclas con semilla, re-escalada a la población completa; la
misma aproximación sirve a las actualizaciones y a la energía, de modo que
las comparaciones de energía son coherentes.
"""

import logging

import numpy as np

logger = logging.getLogger(__name__)


def squared_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.maximum(sq, 0.0)


class GaussianKernel:
    """Kernel gaussiano sobre vectores de características por píxel (N×d)"""

    def __init__(self, feats: np.ndarray, max_exact_pixels: int = 4096, n_anchors: int = 1024, seed: int = 0):
        self.feats = np.asarray(feats, dtype=np.float64)
        self.n = self.feats.shape[0]
        self.exact = self.n <= max_exact_pixels

        if self.exact:
            self.anchors = np.arange(self.n)
            self.scale = 1.0
        else:
            rng = np.random.default_rng(seed)
            m = min(n_anchors, self.n)
            self.anchors = np.sort(rng.choice(self.n, size=m, replace=False))
            self.scale = (self.n - 1) / m
            logger.info(f"Kernel denso aproximado: {m} anclas para {self.n} píxeles")

        self.matrix = np.exp(-0.5 * squared_distances(self.feats, self.feats[self.anchors]))
        # Sin auto-interacción
        self.matrix[self.anchors, np.arange(len(self.anchors))] = 0.0

    def message(self, q: np.ndarray) -> np.ndarray:
        """m_il = sum_{j != i} k_ij q_jl (estimado con las anclas si no es exacto)"""
        q = np.asarray(q, dtype=np.float64)
        return self.scale * (self.matrix @ q[self.anchors])

    def potts_energy(self, hard: np.ndarray, k: int) -> float:
        """sum_{i<j} k_ij [h_i != h_j]"""
        hard = np.asarray(hard).ravel()
        onehot = np.eye(k)[hard]
        msg = self.message(onehot)
        same = msg[np.arange(self.n), hard]
        return float(0.5 * (msg.sum(axis=1) - same).sum())

"""
Color Retinex asistido por razones de color cruzadas.

Los gradientes se toman en espacio logarítmico con diferencias hacia adelante.
Un gradiente es cambio de reflectancia si supera ambos umbrales (brillo y
cromaticidad); opcionalmente se une (OR) con la máscara CCR. Los gradientes
conservados se re-integran con Poisson.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, cg

from .errors import InvalidInputError
from .imgcore import Decomposition, as_linear_image, chromaticity, estimate_shading
from .params import RetinexParams
from .ratios import directional_masks, ratio_field

logger = logging.getLogger(__name__)

LOG_EPS = 1e-4
CG_RTOL = 1e-8


@dataclass
class GradientField:
    """Diferencias hacia adelante del logaritmo: dx es H×(W-1)×3, dy es (H-1)×W×3"""
    log_image: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    brightness_x: np.ndarray
    brightness_y: np.ndarray
    chroma_x: np.ndarray
    chroma_y: np.ndarray

    @property
    def shape(self) -> tuple:
        return self.log_image.shape[:2]


@dataclass
class PoissonResult:
    log_image: np.ndarray
    residual: float
    iterations: int
    degraded: bool


def log_gradients(img) -> GradientField:
    img = as_linear_image(img)
    log_img = np.log(np.maximum(img, LOG_EPS))
    dx = np.diff(log_img, axis=1)
    dy = np.diff(log_img, axis=0)

    brightness = log_img.mean(axis=2)
    _, chroma_r, chroma_g = chromaticity(img)

    return GradientField(
        log_image=log_img,
        dx=dx,
        dy=dy,
        brightness_x=np.abs(np.diff(brightness, axis=1)),
        brightness_y=np.abs(np.diff(brightness, axis=0)),
        chroma_x=np.hypot(np.diff(chroma_r, axis=1), np.diff(chroma_g, axis=1)),
        chroma_y=np.hypot(np.diff(chroma_r, axis=0), np.diff(chroma_g, axis=0)),
    )


def retinex_classify(img, params: RetinexParams | None = None, grad: GradientField | None = None):
    """Marca cambio de reflectancia donde brillo > t_brightness y cromaticidad > t_chroma"""
    params = params or RetinexParams()
    grad = grad or log_gradients(img)
    mask_x = (grad.brightness_x > params.t_brightness) & (grad.chroma_x > params.t_chroma)
    mask_y = (grad.brightness_y > params.t_brightness) & (grad.chroma_y > params.t_chroma)
    return mask_x, mask_y


def ccr_mask(img, params: RetinexParams | None = None):
    """Máscaras direccionales de significancia CCR, alineadas con los gradientes"""
    params = params or RetinexParams()
    field = ratio_field(img, sigma=params.sigma)
    return directional_masks(field, params.ccr_threshold)


def fuse_or(a, b) -> np.ndarray:
    """Disyunción por píxel; basta con que un algoritmo marque reflectancia"""
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise InvalidInputError(f"Dimensiones distintas en fuse_or: {a.shape} vs {b.shape}")
    return a | b


def _difference_operators(height: int, width: int):
    """Operadores dispersos de diferencias hacia adelante (orden row-major)"""
    def forward(n):
        if n < 2:
            return sparse.csr_matrix((0, n))
        return sparse.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n), format="csr")

    dx = sparse.kron(sparse.identity(height, format="csr"), forward(width), format="csr")
    dy = sparse.kron(forward(height), sparse.identity(width, format="csr"), format="csr")
    return dx, dy


def poisson_reconstruct(grad: GradientField, keep) -> PoissonResult:
    """
    Resuelve min ||grad L - g||^2 por canal con gradiente conjugado.

    g vale el gradiente de entrada donde keep = 1 y 0 en el resto. El gauge se
    fija con un término de rango uno que iguala la media de L a la media del
    logaritmo de la entrada.
    """
    keep_x, keep_y = (np.asarray(m, dtype=bool) for m in keep)
    height, width = grad.shape
    if keep_x.shape != grad.dx.shape[:2] or keep_y.shape != grad.dy.shape[:2]:
        raise InvalidInputError(
            f"Máscaras {keep_x.shape}/{keep_y.shape} no coinciden con gradientes "
            f"{grad.dx.shape[:2]}/{grad.dy.shape[:2]}"
        )

    n = height * width
    op_x, op_y = _difference_operators(height, width)
    laplacian = (op_x.T @ op_x + op_y.T @ op_y).tocsr()
    gamma = 1.0 / n
    system = LinearOperator((n, n), matvec=lambda v: laplacian @ v + gamma * v.sum(), dtype=np.float64)
    max_iter = max(1, math.ceil(10 * math.sqrt(n)))

    out = np.empty((height, width, 3))
    worst_residual = 0.0
    total_iterations = 0
    degraded = False

    for c in range(3):
        gauge = grad.log_image[..., c].mean()
        gx = np.where(keep_x, grad.dx[..., c], 0.0).ravel()
        gy = np.where(keep_y, grad.dy[..., c], 0.0).ravel()
        rhs = op_x.T @ gx + op_y.T @ gy + gamma * n * gauge

        iterations = 0

        def count(_):
            nonlocal iterations
            iterations += 1

        solution, info = cg(system, rhs, x0=np.full(n, gauge), rtol=CG_RTOL, atol=0.0,
                            maxiter=max_iter, callback=count)
        norm = np.linalg.norm(rhs)
        residual = float(np.linalg.norm(rhs - system.matvec(solution)) / norm) if norm > 0 else 0.0

        if info != 0:
            degraded = True
            logger.warning(f"Poisson canal {c}: sin convergencia en {max_iter} iteraciones (residuo {residual:.3e})")

        out[..., c] = solution.reshape(height, width)
        worst_residual = max(worst_residual, residual)
        total_iterations += iterations

    return PoissonResult(log_image=out, residual=worst_residual, iterations=total_iterations, degraded=degraded)


def retinex_decompose(img, params: RetinexParams | None = None, use_ccr: bool | None = None) -> Decomposition:
    """Clasifica, fusiona opcionalmente con CCR, re-integra y calcula el sombreado"""
    params = params or RetinexParams()
    use_ccr = params.use_ccr if use_ccr is None else use_ccr
    img = as_linear_image(img)

    grad = log_gradients(img)
    keep_x, keep_y = retinex_classify(img, params, grad)
    if use_ccr:
        ccr_x, ccr_y = ccr_mask(img, params)
        keep_x = fuse_or(keep_x, ccr_x)
        keep_y = fuse_or(keep_y, ccr_y)

    logger.info(f"Retinex (CCR={use_ccr}): {int(keep_x.sum() + keep_y.sum())} gradientes conservados")

    result = poisson_reconstruct(grad, (keep_x, keep_y))
    reflectance = np.exp(result.log_image)
    shading = estimate_shading(img, reflectance)

    return Decomposition(
        reflectance=reflectance,
        shading=shading,
        degraded=result.degraded,
        info={
            "keep_x": keep_x,
            "keep_y": keep_y,
            "residual": result.residual,
            "iterations": result.iterations,
        },
    )

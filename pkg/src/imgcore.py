"""
Representación de imágenes y operaciones de bajo nivel compartidas.

LinearImage: arreglo float64 H×W×3, lineal y no negativo.
ScalarField: arreglo float64 H×W.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter1d

from .errors import InvalidInputError, InvalidParameterError

CHROMA_EPS = 1e-6


def as_linear_image(data, name: str = "imagen") -> np.ndarray:
    """Valida y convierte a LinearImage (H×W×3, finito, >= 0)"""
    img = np.asarray(data, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise InvalidInputError(f"{name}: se esperaba forma H×W×3, recibido {img.shape}")
    if img.shape[0] == 0 or img.shape[1] == 0:
        raise InvalidInputError(f"{name}: imagen vacía")
    if not np.all(np.isfinite(img)):
        raise InvalidInputError(f"{name}: contiene valores no finitos")
    if np.any(img < 0):
        raise InvalidInputError(f"{name}: contiene valores negativos")
    return img


def as_scalar_field(data, name: str = "campo") -> np.ndarray:
    field = np.asarray(data, dtype=np.float64)
    if field.ndim != 2 or field.size == 0:
        raise InvalidInputError(f"{name}: se esperaba un campo H×W no vacío, recibido {field.shape}")
    if not np.all(np.isfinite(field)):
        raise InvalidInputError(f"{name}: contiene valores no finitos")
    return field


def normalize_raster(raster) -> np.ndarray:
    """Lleva un ráster entero de 8/16 bits a [0, 1]; los flotantes se recortan a [0, 1]"""
    raster = np.asarray(raster)
    if raster.dtype == np.uint8:
        return raster.astype(np.float64) / 255.0
    if raster.dtype == np.uint16:
        return raster.astype(np.float64) / 65535.0
    return np.clip(raster.astype(np.float64), 0.0, 1.0)


def linearize_srgb(raster) -> np.ndarray:
    """Aplica la EOTF estándar de sRGB por canal"""
    v = normalize_raster(raster)
    return np.where(v <= 0.04045, v / 12.92, ((v + 0.055) / 1.055) ** 2.4)


def delinearize_srgb(img) -> np.ndarray:
    """Inversa de linearize_srgb; la entrada se recorta a [0, 1]"""
    v = np.clip(np.asarray(img, dtype=np.float64), 0.0, 1.0)
    return np.where(v <= 0.0031308, 12.92 * v, 1.055 * np.power(v, 1 / 2.4) - 0.055)


def linearize(raster, mode: str) -> np.ndarray:
    """Linealización configurable: 'srgb' o 'identity' (datos ya lineales, p. ej. MIT)"""
    if mode == "srgb":
        return linearize_srgb(raster)
    if mode == "identity":
        return normalize_raster(raster)
    raise InvalidParameterError(f"Modo de linealización desconocido: {mode!r}")


def gaussian_blur(img, sigma: float) -> np.ndarray:
    """
    Convolución gaussiana separable con radio ceil(3*sigma) y bordes replicados.

    Acepta campos H×W o imágenes H×W×C; la salida conserva la forma.
    """
    if sigma <= 0:
        raise InvalidParameterError(f"sigma debe ser > 0, recibido {sigma}")
    arr = np.asarray(img, dtype=np.float64)
    radius = math.ceil(3 * sigma)
    out = arr
    for axis in (0, 1):
        out = gaussian_filter1d(out, sigma, axis=axis, mode="nearest", radius=radius)
    return out


def mean_channel(img) -> np.ndarray:
    return np.asarray(img, dtype=np.float64).mean(axis=2)


def chromaticity(img):
    """Devuelve (intensidad, cromaticidad roja, cromaticidad verde)"""
    img = np.asarray(img, dtype=np.float64)
    total = img.sum(axis=2)
    intensity = total / 3.0
    chroma_r = img[..., 0] / (total + CHROMA_EPS)
    chroma_g = img[..., 1] / (total + CHROMA_EPS)
    return intensity, chroma_r, chroma_g


def pixel_features(img) -> np.ndarray:
    """Matriz N×3 de (intensidad, chroma_r, chroma_g) en orden row-major"""
    intensity, chroma_r, chroma_g = chromaticity(img)
    return np.stack([intensity.ravel(), chroma_r.ravel(), chroma_g.ravel()], axis=1)


SHADING_EPS = 1e-4


@dataclass
class Decomposition:
    """Intrínsecos de una imagen: I = R ⊙ S"""
    reflectance: np.ndarray
    shading: np.ndarray
    labels: np.ndarray | None = None
    degraded: bool = False
    info: dict = field(default_factory=dict)


def estimate_shading(img, reflectance) -> np.ndarray:
    """S_c = I_c / max(R_c, eps); reconstruye I exactamente donde R > eps"""
    img = np.asarray(img, dtype=np.float64)
    reflectance = np.asarray(reflectance, dtype=np.float64)
    if img.shape != reflectance.shape:
        raise InvalidInputError(f"Dimensiones distintas: imagen {img.shape}, reflectancia {reflectance.shape}")
    return img / np.maximum(reflectance, SHADING_EPS)


def recompose(reflectance, shading) -> np.ndarray:
    return np.asarray(reflectance, dtype=np.float64) * np.asarray(shading, dtype=np.float64)

"""
Lectura y escritura de rásters: PNG de 8/16 bits y formato crudo IIDF.

IIDF: magic b"IIDF", ancho u32, alto u32, canales u32 (little-endian),
seguido de los datos float32 little-endian en orden row-major intercalado.
"""

import logging
import struct
from pathlib import Path

import cv2
import numpy as np

from .errors import LoadError, ParseError
from .imgcore import linearize

logger = logging.getLogger(__name__)

RAW_MAGIC = b"IIDF"
RAW_SUFFIX = ".iidf"
_HEADER = struct.Struct("<4sIII")


def read_raster(path: str | Path) -> np.ndarray:
    """Lee un PNG (u otro formato de OpenCV) como arreglo RGB uint8/uint16 H×W×3"""
    path = Path(path)
    if not path.exists():
        raise LoadError(f"Archivo no encontrado: {path}")
    raster = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raster is None:
        raise LoadError(f"No se pudo decodificar la imagen: {path}")
    if raster.ndim == 2:
        raster = np.repeat(raster[:, :, None], 3, axis=2)
    elif raster.shape[2] == 4:
        raster = cv2.cvtColor(raster, cv2.COLOR_BGRA2RGB)
    else:
        raster = cv2.cvtColor(raster, cv2.COLOR_BGR2RGB)
    return raster


def read_mask(path: str | Path) -> np.ndarray:
    """Lee una máscara binaria (cualquier canal > 0)"""
    raster = read_raster(path)
    return np.any(raster > 0, axis=2)


def read_image(path: str | Path, linearization: str = "srgb") -> np.ndarray:
    """Carga una LinearImage desde PNG o IIDF"""
    path = Path(path)
    if path.suffix.lower() == RAW_SUFFIX:
        return read_raw(path)
    return linearize(read_raster(path), linearization)


def _to_uint16(img: np.ndarray, normalize: bool) -> np.ndarray:
    arr = np.asarray(img, dtype=np.float64)
    if normalize:
        peak = arr.max() if arr.size else 0.0
        if peak > 0:
            arr = arr / peak
    return np.round(np.clip(arr, 0.0, 1.0) * 65535.0).astype(np.uint16)


def write_png(path: str | Path, img: np.ndarray, normalize: bool = True) -> Path:
    """Escribe un PNG de 16 bits; campos H×W se guardan en gris"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = _to_uint16(img, normalize)
    if data.ndim == 3:
        data = cv2.cvtColor(data, cv2.COLOR_RGB2BGR)
    if not cv2.imwrite(str(path), data):
        raise LoadError(f"No se pudo escribir la imagen: {path}")
    return path


def write_labels(path: str | Path, labels: np.ndarray) -> Path:
    """Guarda un mapa de etiquetas como PNG de 16 bits en gris (índices sin escalar)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), np.asarray(labels).astype(np.uint16)):
        raise LoadError(f"No se pudo escribir la imagen: {path}")
    return path


def write_raw(path: str | Path, img: np.ndarray) -> Path:
    """Escribe el formato crudo IIDF sin pérdidas"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    arr = np.asarray(img)
    if arr.ndim == 2:
        arr = arr[:, :, None]
    height, width, channels = arr.shape
    with open(path, "wb") as f:
        f.write(_HEADER.pack(RAW_MAGIC, width, height, channels))
        f.write(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return path


def read_raw(path: str | Path) -> np.ndarray:
    """Lee un archivo IIDF; devuelve H×W×C (o H×W si C = 1) en float64"""
    path = Path(path)
    if not path.exists():
        raise LoadError(f"Archivo no encontrado: {path}")
    payload = path.read_bytes()
    if len(payload) < _HEADER.size:
        raise ParseError("Cabecera IIDF truncada", str(path))
    magic, width, height, channels = _HEADER.unpack_from(payload)
    if magic != RAW_MAGIC:
        raise ParseError(f"Magic inválido {magic!r}", str(path))
    expected = width * height * channels * 4
    body = payload[_HEADER.size:]
    if len(body) != expected:
        raise ParseError(f"Se esperaban {expected} bytes de datos, hay {len(body)}", f"{path}:byte {_HEADER.size}")
    arr = np.frombuffer(body, dtype="<f4").astype(np.float64).reshape(height, width, channels)
    return arr[:, :, 0] if channels == 1 else arr


def write_image(path: str | Path, img: np.ndarray, normalize: bool = True) -> Path:
    """Escribe según la extensión: .iidf crudo, cualquier otra como PNG de 16 bits"""
    path = Path(path)
    if path.suffix.lower() == RAW_SUFFIX:
        return write_raw(path, img)
    return write_png(path, img, normalize=normalize)

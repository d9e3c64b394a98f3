"""
Cargadores para las estructuras en disco de MIT, IIW, ISTD y SRD.

MIT:  <caso>/diffuse.png, reflectance.png, shading.png, mask.png (datos lineales)
IIW:  <imagenes>/<id>.png y <juicios>/<id>.json
ISTD: <raiz>/<split>_A (sombra), <split>_B (máscara), <split>_C (sin sombra)
SRD:  <raiz>/shadow/<id>.jpg, <raiz>/shadow_free/<id>_free.jpg, <raiz>/mask opcional
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import LoadError, ParseError
from .evaluation import DARKER_A, DARKER_B, EQUAL, Judgment
from .rasters import read_image, read_mask

logger = logging.getLogger(__name__)

MIT_FILES = ("diffuse", "reflectance", "shading", "mask")
IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")
IIW_TO_RELATION = {"1": DARKER_A, "2": DARKER_B, "E": EQUAL}
RELATION_TO_IIW = {v: k for k, v in IIW_TO_RELATION.items()}
SHADOW_LAYOUTS = ("istd", "srd")


@dataclass
class MitCase:
    name: str
    image: np.ndarray
    reflectance: np.ndarray
    shading: np.ndarray
    mask: np.ndarray


@dataclass
class ShadowCase:
    name: str
    image: np.ndarray
    shadow_free: np.ndarray
    mask: np.ndarray | None


def _find(directory: Path, stem: str) -> Path | None:
    for suffix in IMAGE_SUFFIXES:
        candidate = directory / f"{stem}{suffix}"
        if candidate.exists():
            return candidate
    return None


def _require(directory: Path, stem: str) -> Path:
    path = _find(directory, stem)
    if path is None:
        raise LoadError(f"Falta el archivo '{stem}' ({'/'.join(IMAGE_SUFFIXES)}) en {directory}")
    return path


def list_mit_cases(root: str | Path) -> list:
    root = Path(root)
    if not root.is_dir():
        raise LoadError(f"Directorio MIT no encontrado: {root}")
    return sorted(p for p in root.iterdir() if p.is_dir() and _find(p, "diffuse") is not None)


def load_mit_case(case_dir: str | Path, linearization: str = "identity") -> MitCase:
    """Devuelve imagen, reflectancia, sombreado y máscara alineados"""
    case_dir = Path(case_dir)
    if not case_dir.is_dir():
        raise LoadError(f"Caso MIT no encontrado: {case_dir}")
    paths = {name: _require(case_dir, name) for name in MIT_FILES}

    image = read_image(paths["diffuse"], linearization)
    reflectance = read_image(paths["reflectance"], linearization)
    shading = read_image(paths["shading"], linearization)
    mask = read_mask(paths["mask"])

    shapes = {image.shape[:2], reflectance.shape[:2], shading.shape[:2], mask.shape}
    if len(shapes) != 1:
        raise LoadError(f"Rásters con dimensiones distintas en {case_dir}: {sorted(shapes)}")
    return MitCase(case_dir.name, image, reflectance, shading, mask)


def _field(record: dict, key: str, location: str):
    if not isinstance(record, dict) or key not in record:
        raise ParseError(f"Falta el campo '{key}'", location)
    return record[key]


def load_iiw_judgments(path: str | Path) -> list:
    """
    Lee el documento de comparaciones de IIW y resuelve cada comparación a un Judgment.

    Se omiten comparaciones con relación desconocida, peso no positivo o
    puntos no opacos, como en la métrica original.
    """
    path = Path(path)
    if not path.exists():
        raise LoadError(f"Archivo de juicios no encontrado: {path}")
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"JSON inválido: {e.msg}", f"{path}:{e.lineno}:{e.colno}") from e

    points = _field(document, "intrinsic_points", str(path))
    comparisons = _field(document, "intrinsic_comparisons", str(path))

    by_id = {}
    for index, point in enumerate(points):
        location = f"{path}:intrinsic_points[{index}]"
        try:
            by_id[_field(point, "id", location)] = (
                float(_field(point, "x", location)),
                float(_field(point, "y", location)),
                bool(point.get("opaque", True)),
            )
        except (TypeError, ValueError) as e:
            raise ParseError(f"Punto inválido: {e}", location) from e

    judgments = []
    skipped = 0
    for index, comparison in enumerate(comparisons):
        location = f"{path}:intrinsic_comparisons[{index}]"
        darker = _field(comparison, "darker", location)
        weight = _field(comparison, "darker_score", location)
        if weight is not None:
            try:
                weight = float(weight)
            except (TypeError, ValueError) as e:
                raise ParseError(f"darker_score inválido: {weight!r}", location) from e
        ids = (_field(comparison, "point1", location), _field(comparison, "point2", location))
        for key, point_id in zip(("point1", "point2"), ids):
            if point_id not in by_id:
                raise ParseError(f"'{key}' referencia un punto inexistente ({point_id})", location)
        a, b = by_id[ids[0]], by_id[ids[1]]
        if darker not in IIW_TO_RELATION or weight is None or weight <= 0 or not (a[2] and b[2]):
            skipped += 1
            continue
        try:
            judgments.append(Judgment((a[0], a[1]), (b[0], b[1]), IIW_TO_RELATION[darker], weight))
        except ValueError as e:
            raise ParseError(str(e), location) from e

    if skipped:
        logger.debug(f"{path.name}: {skipped} comparaciones omitidas")
    return judgments


def save_iiw_judgments(judgments, path: str | Path) -> Path:
    """Escribe los juicios con la misma estructura que lee load_iiw_judgments"""
    points = []
    comparisons = []
    index = {}

    def point_id(point):
        key = (float(point[0]), float(point[1]))
        if key not in index:
            index[key] = len(points)
            points.append({"id": index[key], "x": key[0], "y": key[1], "opaque": True})
        return index[key]

    for judgment in judgments:
        comparisons.append({
            "point1": point_id(judgment.point_a),
            "point2": point_id(judgment.point_b),
            "darker": RELATION_TO_IIW[judgment.darker],
            "darker_score": judgment.weight,
        })

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps({"intrinsic_points": points, "intrinsic_comparisons": comparisons},
                               indent=2, sort_keys=True), encoding="utf-8")
    return path


def list_iiw_cases(images_dir: str | Path, judgments_dir: str | Path) -> list:
    """Pares (imagen, juicios) emparejados por nombre"""
    images_dir = Path(images_dir)
    judgments_dir = Path(judgments_dir)
    for directory in (images_dir, judgments_dir):
        if not directory.is_dir():
            raise LoadError(f"Directorio IIW no encontrado: {directory}")
    cases = []
    for judgments_path in sorted(judgments_dir.glob("*.json")):
        image_path = _find(images_dir, judgments_path.stem)
        if image_path is None:
            logger.warning(f"Sin imagen para {judgments_path.name}")
            continue
        cases.append((image_path, judgments_path))
    return cases


def _istd_dirs(root: Path, split: str):
    dirs = {suffix: root / f"{split}_{suffix}" for suffix in ("A", "B", "C")}
    if not dirs["A"].is_dir() or not dirs["C"].is_dir():
        raise LoadError(f"Estructura ISTD incompleta en {root} (split '{split}')")
    return dirs["A"], dirs["C"], dirs["B"] if dirs["B"].is_dir() else None


def _srd_dirs(root: Path):
    shadow, free, mask = root / "shadow", root / "shadow_free", root / "mask"
    if not shadow.is_dir() or not free.is_dir():
        raise LoadError(f"Estructura SRD incompleta en {root}")
    return shadow, free, mask if mask.is_dir() else None


def list_shadow_cases(root: str | Path, layout: str = "istd", split: str = "test") -> list:
    root = Path(root)
    if layout not in SHADOW_LAYOUTS:
        raise LoadError(f"Estructura desconocida: {layout!r}")
    shadow_dir = _istd_dirs(root, split)[0] if layout == "istd" else _srd_dirs(root)[0]
    return sorted(p.stem for p in shadow_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)


def load_shadow_case(root: str | Path, name: str, layout: str = "istd", split: str = "test",
                     linearization: str = "srgb") -> ShadowCase:
    """Imagen con sombra, imagen sin sombra y máscara (o None)"""
    root = Path(root)
    if layout == "istd":
        shadow_dir, free_dir, mask_dir = _istd_dirs(root, split)
        free_stem = name
    elif layout == "srd":
        shadow_dir, free_dir, mask_dir = _srd_dirs(root)
        free_stem = f"{name}_free"
    else:
        raise LoadError(f"Estructura desconocida: {layout!r}")

    image = read_image(_require(shadow_dir, name), linearization)
    shadow_free = read_image(_require(free_dir, free_stem), linearization)
    mask = None
    if mask_dir is not None:
        mask_path = _find(mask_dir, name)
        if mask_path is not None:
            mask = read_mask(mask_path)

    if image.shape != shadow_free.shape or (mask is not None and mask.shape != image.shape[:2]):
        raise LoadError(f"Rásters con dimensiones distintas para el caso '{name}' en {root}")
    return ShadowCase(name, image, shadow_free, mask)

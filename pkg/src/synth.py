"""
Generador de escenas sintéticas con verdad de terreno.

Reflectancia Mondrian (parches rectangulares de colores separables por las
razones cruzadas), sombreado geométrico suave, sombras proyectadas de factor
0.25 con borde difuminado, e iluminante de color:

    I_c = m · e_c · s_c
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GenerationError, InvalidInputError, InvalidParameterError
from .imgcore import as_linear_image, as_scalar_field, gaussian_blur
from .rasters import write_png, write_raw
from .ratios import cross_ratio_array, round_half_away

logger = logging.getLogger(__name__)

SHADING_KINDS = ("smooth", "shadow", "mixed", "flat")
SMOOTH_RANGE = (0.3, 1.0)
SHADOW_FACTOR = 0.25
SHADOW_BLUR = 1.5
PALETTE_RANGE = (0.05, 1.0)
MAX_ATTEMPTS = 10000
MIN_STRIPE = 2


@dataclass
class SyntheticScene:
    reflectance: np.ndarray
    shading_geom: np.ndarray
    illuminant: tuple
    image: np.ndarray
    seed: int | None = None
    palette: list = field(default_factory=list)
    shadow_mask: np.ndarray | None = None
    shading_kind: str = "flat"

    @property
    def shading(self) -> np.ndarray:
        """Sombreado por canal m · e_c (H×W×3)"""
        return self.shading_geom[..., None] * np.asarray(self.illuminant, dtype=np.float64)


def _neutral(p1, p2) -> bool:
    return bool(np.all(round_half_away(cross_ratio_array(p1, p2)) == 1.0))


def gen_palette(n_colors: int, rng: np.random.Generator) -> np.ndarray:
    """
    Colores con separación por razones cruzadas en ambos sentidos para cada par.

    El orden importa: los tripletes redondeados entre colores consecutivos son
    distintos entre sí, de modo que las franjas del Mondrian aportan al menos
    n_colors tripletes únicos.
    """
    palette = [rng.uniform(*PALETTE_RANGE, size=3)]
    boundary_triples = []
    for index in range(1, n_colors):
        for _ in range(MAX_ATTEMPTS):
            candidate = rng.uniform(*PALETTE_RANGE, size=3)
            if any(_neutral(candidate, p) or _neutral(p, candidate) for p in palette):
                continue
            triple = tuple(round_half_away(cross_ratio_array(palette[-1], candidate)).tolist())
            if triple in boundary_triples:
                continue
            boundary_triples.append(triple)
            palette.append(candidate)
            break
        else:
            raise GenerationError(f"No se encontró un color separable número {index + 1} "
                                  f"tras {MAX_ATTEMPTS} intentos")
    return np.array(palette)


def _mondrian(width: int, height: int, n_colors: int, seed: int):
    if n_colors < 1:
        raise InvalidParameterError(f"n_colors debe ser >= 1, recibido {n_colors}")
    if width < 1 or height < 1:
        raise InvalidParameterError(f"Tamaño inválido: {width}x{height}")
    if n_colors > 1 and width < MIN_STRIPE * n_colors:
        raise GenerationError(f"Un ancho de {width} no admite {n_colors} franjas de {MIN_STRIPE} píxeles")

    rng = np.random.default_rng(seed)
    palette = gen_palette(n_colors, rng)

    if n_colors == 1:
        return np.broadcast_to(palette[0], (height, width, 3)).copy(), palette, np.zeros((height, width), dtype=int)

    # Franjas verticales en orden de paleta; la fila 0 nunca se cubre
    widths = MIN_STRIPE + rng.multinomial(width - MIN_STRIPE * n_colors, np.full(n_colors, 1.0 / n_colors))
    labels = np.repeat(np.repeat(np.arange(n_colors), widths)[None, :], height, axis=0)

    if height > 1:
        for _ in range(n_colors):
            box_w = int(rng.integers(1, max(2, width // 3) + 1))
            box_h = int(rng.integers(1, max(2, height // 3) + 1))
            x0 = int(rng.integers(0, width))
            y0 = int(rng.integers(1, height))
            labels[y0:y0 + box_h, x0:x0 + box_w] = int(rng.integers(0, n_colors))

    return palette[labels], palette, labels


def gen_mondrian(width: int, height: int, n_colors: int, seed: int = 0) -> np.ndarray:
    """Mondrian con exactamente n_colors colores, determinista por semilla"""
    image, _, _ = _mondrian(width, height, n_colors, seed)
    return image


def shadow_region(width: int, height: int, seed: int = 0) -> np.ndarray:
    """Soporte rectangular (sin difuminar) de la sombra proyectada"""
    rng = np.random.default_rng([seed, 1])
    region_w = max(1, int(rng.integers(width // 4, width // 2 + 1)))
    region_h = max(1, int(rng.integers(height // 4, height // 2 + 1)))
    x0 = int(rng.integers(0, max(1, width - region_w + 1)))
    y0 = int(rng.integers(0, max(1, height - region_h + 1)))
    mask = np.zeros((height, width), dtype=bool)
    mask[y0:y0 + region_h, x0:x0 + region_w] = True
    return mask


def _smooth_field(width: int, height: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng([seed, 0])
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    scale = max(width, height)
    total = np.zeros((height, width))
    for _ in range(4):
        cx, cy = rng.uniform(0, width), rng.uniform(0, height)
        spread = rng.uniform(0.25, 0.6) * scale
        amplitude = rng.uniform(0.5, 1.0)
        total += amplitude * np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * spread ** 2))
    lo, hi = total.min(), total.max()
    if hi - lo < 1e-12:
        return np.full((height, width), SMOOTH_RANGE[1])
    return SMOOTH_RANGE[0] + (SMOOTH_RANGE[1] - SMOOTH_RANGE[0]) * (total - lo) / (hi - lo)


def _shadow_field(width: int, height: int, seed: int) -> np.ndarray:
    base = np.where(shadow_region(width, height, seed), SHADOW_FACTOR, 1.0)
    return gaussian_blur(base, SHADOW_BLUR)


def gen_shading(width: int, height: int, kind: str = "smooth", seed: int = 0) -> np.ndarray:
    """Campo de sombreado geométrico estrictamente positivo"""
    if kind == "smooth":
        return _smooth_field(width, height, seed)
    if kind == "shadow":
        return _shadow_field(width, height, seed)
    if kind == "mixed":
        return _smooth_field(width, height, seed) * _shadow_field(width, height, seed)
    if kind == "flat":
        return np.ones((height, width))
    raise InvalidParameterError(f"Tipo de sombreado desconocido: {kind!r} (opciones: {', '.join(SHADING_KINDS)})")


def compose(reflectance, shading, illuminant=(1.0, 1.0, 1.0)) -> SyntheticScene:
    """image_c = shading · illuminant_c · reflectance_c"""
    reflectance = as_linear_image(reflectance, "reflectancia")
    shading = as_scalar_field(shading, "sombreado")
    illuminant = tuple(float(v) for v in illuminant)
    if shading.shape != reflectance.shape[:2]:
        raise InvalidInputError(f"Sombreado {shading.shape} y reflectancia {reflectance.shape[:2]} no coinciden")
    if np.any(shading <= 0):
        raise InvalidInputError("sombreado: debe ser estrictamente positivo")
    if len(illuminant) != 3 or min(illuminant) <= 0:
        raise InvalidParameterError(f"El iluminante debe tener 3 componentes positivas, recibido {illuminant}")

    image = shading[..., None] * np.asarray(illuminant) * reflectance
    return SyntheticScene(reflectance=reflectance, shading_geom=shading, illuminant=illuminant, image=image)


def make_scene(width: int, height: int, n_colors: int, shading_kind: str = "mixed",
               seed: int = 0, illuminant=(1.0, 1.0, 1.0)) -> SyntheticScene:
    reflectance, palette, _ = _mondrian(width, height, n_colors, seed)
    shading = gen_shading(width, height, shading_kind, seed)
    scene = compose(reflectance, shading, illuminant)
    scene.seed = seed
    scene.palette = palette.tolist()
    scene.shading_kind = shading_kind
    if shading_kind in ("shadow", "mixed"):
        scene.shadow_mask = shadow_region(width, height, seed)
    logger.debug(f"Escena {width}x{height}, {n_colors} colores, sombreado {shading_kind}, semilla {seed}")
    return scene


def save_scene(scene: SyntheticScene, out_dir: str | Path) -> Path:
    """Escribe imagen, reflectancia y sombreado (PNG 16 bits + IIDF) y manifest.json"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, data in (("image", scene.image), ("reflectance", scene.reflectance), ("shading", scene.shading)):
        write_png(out_dir / f"{name}.png", data, normalize=False)
        write_raw(out_dir / f"{name}.iidf", data)

    height, width = scene.shading_geom.shape
    manifest = {
        "seed": scene.seed,
        "size": [width, height],
        "shading": scene.shading_kind,
        "palette": scene.palette,
        "illuminant": list(scene.illuminant),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
    logger.info(f"Escena guardada en {out_dir}")
    return path

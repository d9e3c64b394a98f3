"""
Parámetros de los módulos y configuración completa del pipeline.

Cada grupo es un dataclass que valida sus invariantes al construirse.
`PipelineConfig.from_dict` rechaza claves desconocidas en cualquier nivel.
"""

from dataclasses import MISSING, dataclass, field, fields, asdict, is_dataclass
from typing import Any

from .errors import ConfigError, InvalidParameterError

LINEARIZATIONS = ("srgb", "identity")
FUSIONS = ("geometric", "arithmetic", "m1")
PIPELINES = ("crf", "retinex")


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise InvalidParameterError(message)


@dataclass
class RatioParams:
    """Suavizado, umbral y fusión de las razones de color cruzadas"""
    sigma: float = 1.0
    threshold: float = 0.02
    fusion: str = "geometric"
    k_max: int = 50

    def __post_init__(self):
        _require(self.sigma > 0, f"sigma debe ser > 0, recibido {self.sigma}")
        _require(self.threshold >= 0, f"threshold debe ser >= 0, recibido {self.threshold}")
        _require(self.fusion in FUSIONS, f"fusion debe ser una de {FUSIONS}, recibido {self.fusion!r}")
        _require(self.k_max >= 2, f"k_max debe ser >= 2, recibido {self.k_max}")


@dataclass
class RetinexParams:
    """Umbrales de Color Retinex y de la máscara CCR"""
    t_brightness: float = 0.075
    t_chroma: float = 0.075
    ccr_threshold: float = 0.02
    sigma: float = 1.0
    use_ccr: bool = True

    def __post_init__(self):
        _require(self.t_brightness >= 0, f"t_brightness debe ser >= 0, recibido {self.t_brightness}")
        _require(self.t_chroma >= 0, f"t_chroma debe ser >= 0, recibido {self.t_chroma}")
        _require(self.ccr_threshold >= 0, f"ccr_threshold debe ser >= 0, recibido {self.ccr_threshold}")
        _require(self.sigma > 0, f"sigma debe ser > 0, recibido {self.sigma}")


@dataclass
class ClusterParams:
    """k fijo o adaptativo, pesos de las razones y control de k-means"""
    k: Any = "auto"
    use_ratios: bool = True
    ratio_weight: float = 0.5
    seed: int = 0
    k_max: int = 50
    max_iter: int = 300
    tol: float = 1e-6

    def __post_init__(self):
        if isinstance(self.k, str):
            _require(self.k == "auto", f"k debe ser 'auto' o un entero, recibido {self.k!r}")
        else:
            _require(isinstance(self.k, int) and not isinstance(self.k, bool) and self.k >= 1,
                     f"k debe ser un entero >= 1, recibido {self.k!r}")
        _require(self.ratio_weight >= 0, f"ratio_weight debe ser >= 0, recibido {self.ratio_weight}")
        _require(self.k_max >= 2, f"k_max debe ser >= 2, recibido {self.k_max}")
        _require(self.max_iter >= 1, f"max_iter debe ser >= 1, recibido {self.max_iter}")
        _require(self.tol >= 0, f"tol debe ser >= 0, recibido {self.tol}")

    @property
    def adaptive(self) -> bool:
        return self.k == "auto"


@dataclass
class CrfParams:
    """
    Pesos, anchos de banda e iteraciones de la energía del CRF denso.

    theta_pos = None significa 0.1 * max(H, W), resuelto por imagen.
    """
    w_p: float = 1.0
    w_s: float = 0.5
    w_l: float = 0.1
    theta_pos: float | None = None
    theta_int: float = 0.1
    theta_chroma: float = 0.1
    theta_ratio: float = 0.5
    iterations: int = 10
    shading_log_range: tuple = (-2.5, 2.5)
    use_ratio_feature: bool = True
    ratio_sigma: float = 1.0
    seed: int = 0
    max_exact_pixels: int = 4096
    n_anchors: int = 1024
    graphcut_max_pixels: int = 256
    material_regions: bool = True
    material_tol: float = 0.05
    material_min_pixels: int = 32

    def __post_init__(self):
        self.shading_log_range = tuple(float(v) for v in self.shading_log_range)
        for name in ("w_p", "w_s", "w_l"):
            _require(getattr(self, name) >= 0, f"{name} debe ser >= 0, recibido {getattr(self, name)}")
        for name in ("theta_int", "theta_chroma", "theta_ratio", "ratio_sigma"):
            _require(getattr(self, name) > 0, f"{name} debe ser > 0, recibido {getattr(self, name)}")
        _require(self.theta_pos is None or self.theta_pos > 0,
                 f"theta_pos debe ser > 0, recibido {self.theta_pos}")
        _require(self.iterations >= 1, f"iterations debe ser >= 1, recibido {self.iterations}")
        _require(len(self.shading_log_range) == 2
                 and self.shading_log_range[0] < self.shading_log_range[1],
                 f"shading_log_range requiere lo < hi, recibido {self.shading_log_range}")
        _require(self.max_exact_pixels >= 1, "max_exact_pixels debe ser >= 1")
        _require(self.n_anchors >= 1, "n_anchors debe ser >= 1")
        _require(self.graphcut_max_pixels >= 0, "graphcut_max_pixels debe ser >= 0")
        _require(self.material_tol >= 0, f"material_tol debe ser >= 0, recibido {self.material_tol}")
        _require(self.material_min_pixels >= 1, "material_min_pixels debe ser >= 1")

    def resolved_theta_pos(self, height: int, width: int) -> float:
        if self.theta_pos is not None:
            return float(self.theta_pos)
        return 0.1 * max(height, width)


@dataclass
class GuidedFilterParams:
    """Post-procesado opcional de la reflectancia"""
    enabled: bool = False
    radius: int = 8
    eps: float = 1e-3

    def __post_init__(self):
        _require(self.radius >= 1, f"radius debe ser >= 1, recibido {self.radius}")
        _require(self.eps > 0, f"eps debe ser > 0, recibido {self.eps}")


@dataclass
class OutputParams:
    normalize: bool = True
    write_raw: bool = False


@dataclass
class PipelineConfig:
    """Configuración completa; se registra en cada ejecución para reproducibilidad"""
    pipeline: str = "crf"
    linearization: str = "srgb"
    ratios: RatioParams = field(default_factory=RatioParams)
    retinex: RetinexParams = field(default_factory=RetinexParams)
    clustering: ClusterParams = field(default_factory=ClusterParams)
    crf: CrfParams = field(default_factory=CrfParams)
    guided_filter: GuidedFilterParams = field(default_factory=GuidedFilterParams)
    output: OutputParams = field(default_factory=OutputParams)

    def __post_init__(self):
        _require(self.pipeline in PIPELINES, f"pipeline debe ser uno de {PIPELINES}, recibido {self.pipeline!r}")
        _require(self.linearization in LINEARIZATIONS,
                 f"linearization debe ser una de {LINEARIZATIONS}, recibido {self.linearization!r}")

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        return _build(cls, data, "")


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _build(cls, data: dict, prefix: str):
    if not isinstance(data, dict):
        raise ConfigError(f"Se esperaba un objeto en '{prefix or '<raíz>'}'")
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in data.items():
        path = f"{prefix}.{key}" if prefix else key
        if key not in known:
            raise ConfigError(f"Clave de configuración desconocida: '{path}'")
        factory = known[key].default_factory
        if factory is not MISSING and is_dataclass(factory):
            kwargs[key] = _build(factory, value, path)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except ConfigError:
        raise
    except InvalidParameterError as e:
        raise ConfigError(f"Valor inválido en '{prefix or '<raíz>'}': {e}") from e
    except TypeError as e:
        raise ConfigError(f"Tipo inválido en '{prefix or '<raíz>'}': {e}") from e

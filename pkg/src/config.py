import copy
import json
import logging
import os
from pathlib import Path

from dotenv import load_dotenv

from .errors import ConfigError, LoadError
from .params import PipelineConfig

# Cargar variables de entorno
load_dotenv()


class Config:
    """Configuración de la aplicación"""

    # Rutas de datos
    BASE_DIR = Path(__file__).parent.parent
    DATA_DIR = Path(os.getenv("IID_DATA_DIR", str(BASE_DIR / "data")))
    REPORTS_DIR = Path(os.getenv("IID_REPORTS_DIR", str(DATA_DIR / "reports")))
    LOGS_DIR = BASE_DIR / "logs"

    # Logging
    LOG_LEVEL = os.getenv("IID_LOG_LEVEL", "INFO").upper()
    LOG_FILE = os.getenv("IID_LOG_FILE", "")

    # Configuración de hilos para procesamiento paralelo
    THREADS = int(os.getenv("IID_THREADS", str(os.cpu_count() or 1)))

    @classmethod
    def validate_env(cls):
        """Valida que las variables de entorno tengan valores utilizables"""
        problems = []
        if cls.THREADS < 1:
            problems.append(f"IID_THREADS={cls.THREADS}")
        if not isinstance(logging.getLevelName(cls.LOG_LEVEL), int):
            problems.append(f"IID_LOG_LEVEL={cls.LOG_LEVEL}")

        if problems:
            raise ValueError(f"Variables de entorno inválidas: {', '.join(problems)}")

        return True


# Instancia global de configuración
config = Config()


def setup_logging(level: str | None = None) -> None:
    """Configura el logging de la CLI: consola y, si se pide, archivo en logs/"""
    handlers = [logging.StreamHandler()]
    if config.LOG_FILE:
        config.LOGS_DIR.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(config.LOGS_DIR / config.LOG_FILE))

    logging.basicConfig(
        level=level or config.LOG_LEVEL,
        format='%(asctime)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True
    )


# Presets por dataset: linealización y peso de las razones en el clustering
PRESETS = {
    "mit": {"linearization": "identity", "clustering": {"ratio_weight": 0.5}},
    "iiw": {"linearization": "srgb", "clustering": {"ratio_weight": 10.0}},
}

# Variantes de la ablación: modelo por defecto, inyecciones individuales y modelo final
METHODS = {
    "default": {
        "pipeline": "crf",
        "clustering": {"k": 20, "use_ratios": False},
        "crf": {"use_ratio_feature": False},
    },
    "adaptive_k": {
        "pipeline": "crf",
        "clustering": {"k": "auto", "use_ratios": False},
        "crf": {"use_ratio_feature": False},
    },
    "ratio_features": {
        "pipeline": "crf",
        "clustering": {"k": "auto", "use_ratios": True},
        "crf": {"use_ratio_feature": False},
    },
    "ratio_pairwise": {
        "pipeline": "crf",
        "clustering": {"k": 20, "use_ratios": False},
        "crf": {"use_ratio_feature": True},
    },
    "final": {
        "pipeline": "crf",
        "clustering": {"k": "auto", "use_ratios": True},
        "crf": {"use_ratio_feature": True},
    },
    "retinex": {"pipeline": "retinex", "retinex": {"use_ccr": False}},
    "retinex_ccr": {"pipeline": "retinex", "retinex": {"use_ccr": True}},
}


def merge_dicts(base: dict, override: dict) -> dict:
    """Fusión recursiva; los valores de override ganan"""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = merge_dicts(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def read_config_file(path: str | Path) -> dict:
    """Lee un archivo JSON de configuración"""
    path = Path(path)
    if not path.exists():
        raise LoadError(f"Archivo de configuración no encontrado: {path}")
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON inválido en {path}: línea {e.lineno}, columna {e.colno}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"La configuración en {path} debe ser un objeto JSON")
    return data


def load_pipeline_config(path: str | Path | None = None,
                         preset: str | None = None,
                         method: str | None = None,
                         overrides: dict | None = None) -> PipelineConfig:
    """
    Resuelve la configuración del pipeline.

    Precedencia: valores por defecto < método < preset < archivo JSON < flags.
    """
    resolved: dict = {}
    if method is not None:
        if method not in METHODS:
            raise ConfigError(f"Método desconocido: {method!r} (opciones: {', '.join(METHODS)})")
        resolved = merge_dicts(resolved, METHODS[method])
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(f"Preset desconocido: {preset!r} (opciones: {', '.join(PRESETS)})")
        resolved = merge_dicts(resolved, PRESETS[preset])
    if path is not None:
        resolved = merge_dicts(resolved, read_config_file(path))
    if overrides:
        resolved = merge_dicts(resolved, overrides)
    return PipelineConfig.from_dict(resolved)


def dump_config(cfg: PipelineConfig) -> str:
    """Forma JSON canónica (claves ordenadas) de la configuración"""
    return json.dumps(cfg.to_dict(), sort_keys=True)

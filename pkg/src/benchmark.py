"""
Evaluación sobre datasets: MIT (LMSE), IIW (WHDR), ISTD/SRD (consistencia de sombra)
y suites sintéticas. Cada caso se puntúa dos veces: reflectancia cruda y
post-procesada con el filtro guiado.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
from tqdm import tqdm

from .config import config
from .crf import decompose, postprocess
from .datasets import (list_iiw_cases, list_mit_cases, list_shadow_cases, load_iiw_judgments,
                       load_mit_case, load_shadow_case)
from .errors import InvalidInputError
from .evaluation import central_tendency, lmse, masked_lmse, shadow_consistency, whdr
from .params import PipelineConfig
from .rasters import read_image

logger = logging.getLogger(__name__)


class DatasetEvaluator:
    """Ejecuta un método de descomposición sobre un dataset y resume los errores"""

    def __init__(self, cfg: PipelineConfig, method: str = "custom", threads: int | None = None,
                 progress: bool = True):
        self.cfg = cfg
        self.method = method
        self.threads = threads or config.THREADS
        self.progress = progress
        # Las puntuaciones crudas nunca llevan filtro guiado
        self.raw_cfg = replace(cfg, guided_filter=replace(cfg.guided_filter, enabled=False))

    def _reflectances(self, image: np.ndarray):
        decomposition, _ = decompose(image, self.raw_cfg)
        raw = decomposition.reflectance
        return raw, postprocess(image, raw, self.cfg.guided_filter)

    def _run(self, cases: list, score, desc: str) -> list:
        """Procesa casos en paralelo; el orden de salida es el de entrada"""
        if not cases:
            raise InvalidInputError("El dataset no contiene casos")
        with ThreadPoolExecutor(max_workers=self.threads) as executor:
            results = executor.map(score, cases)
            if self.progress:
                results = tqdm(results, total=len(cases), desc=desc, bar_format="{l_bar}{bar:30}{r_bar}")
            return list(results)

    def evaluate_mit(self, root: str | Path) -> dict:
        def score(case_dir):
            case = load_mit_case(case_dir, self.cfg.linearization)
            raw, post = self._reflectances(case.image)
            return {
                "case": case.name,
                "lmse_raw": masked_lmse(raw, case.reflectance, case.mask),
                "lmse_post": masked_lmse(post, case.reflectance, case.mask),
            }

        rows = self._run(list_mit_cases(root), score, "Evaluando MIT")
        return self._report("mit", rows)

    def evaluate_iiw(self, images_dir: str | Path, judgments_dir: str | Path) -> dict:
        def score(pair):
            image_path, judgments_path = pair
            # Cargar juicios del caso
            judgments = load_iiw_judgments(judgments_path)
            if not judgments:
                logger.warning(f"{judgments_path.name}: sin juicios válidos, se omite")
                return None
            # Calcular WHDR crudo y post-procesado
            raw, post = self._reflectances(read_image(image_path, self.cfg.linearization))
            return {
                "case": image_path.stem,
                "whdr_raw": whdr(raw, judgments),
                "whdr_post": whdr(post, judgments),
            }

        rows = [r for r in self._run(list_iiw_cases(images_dir, judgments_dir), score, "Evaluando IIW") if r]
        return self._report("iiw", rows)

    def evaluate_shadow(self, root: str | Path, layout: str = "istd", split: str = "test") -> dict:
        def score(name):
            case = load_shadow_case(root, name, layout, split, self.cfg.linearization)
            # Descomponer la escena con sombra y su versión sin sombra
            raw_s, post_s = self._reflectances(case.image)
            raw_f, post_f = self._reflectances(case.shadow_free)
            return {
                "case": name,
                "shadow_raw": shadow_consistency(raw_s, raw_f, case.mask),
                "shadow_post": shadow_consistency(post_s, post_f, case.mask),
            }

        rows = self._run(list_shadow_cases(root, layout, split), score, f"Evaluando {layout.upper()}")
        return self._report(layout, rows)

    def evaluate_scenes(self, scenes: list) -> dict:
        """Suite sintética: LMSE de reflectancia contra la verdad de terreno"""
        def score(indexed):
            index, scene = indexed
            raw, post = self._reflectances(scene.image)
            return {
                "case": f"scene_{index:03d}",
                "lmse_raw": lmse(raw, scene.reflectance),
                "lmse_post": lmse(post, scene.reflectance),
            }

        rows = self._run(list(enumerate(scenes)), score, "Evaluando escenas")
        return self._report("synthetic", rows)

    def _report(self, dataset: str, rows: list) -> dict:
        # Calcular tendencia central por columna de puntuación
        df = pd.DataFrame(rows)
        summary = {
            column: central_tendency(df[column]).to_dict()
            for column in df.columns if column != "case"
        }
        # Mostrar resumen
        logger.info(f"{dataset}: {len(df)} casos evaluados con el método '{self.method}'")
        for column, stats in summary.items():
            logger.info(f"  {column}: media {stats['mean']:.4f}, mediana {stats['median']:.4f}, "
                        f"trimedia {stats['trimean']:.4f}")
        return {
            "dataset": dataset,
            "method": self.method,
            "config": self.cfg.to_dict(),
            "cases": rows,
            "summary": summary,
        }


def save_report(report: dict, path: str | Path, plots: bool = False) -> Path:
    """Guarda report.json (claves ordenadas, sin marcas de tiempo) y la tabla CSV"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True), encoding="utf-8")

    df = pd.DataFrame(report["cases"])
    df.to_csv(path.with_suffix(".csv"), index=False)

    if plots:
        _generate_plots(df, path.with_suffix(".png"), report["dataset"])

    logger.info(f"Reporte guardado en {path}")
    return path


def _generate_plots(df: pd.DataFrame, path: Path, title: str) -> None:
    """Histograma por columna de puntuación"""
    columns = [c for c in df.columns if c != "case"]
    fig, axes = plt.subplots(1, len(columns), figsize=(5 * len(columns), 4), squeeze=False)
    for ax, column in zip(axes[0], columns):
        ax.hist(df[column], bins=min(20, max(1, len(df))), color="steelblue", edgecolor="black")
        ax.set_title(column)
        ax.set_xlabel("error")
        ax.set_ylabel("casos")
    fig.suptitle(f"Distribución de errores ({title})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)

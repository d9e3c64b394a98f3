"""
Línea de comandos: decompose, retinex, ratios, cluster, synth y eval.

Uso:
    ./iid decompose foto.png --out-r r.png --out-s s.png --report energy.json
    ./iid eval mit ./MIT --method final --report report.json
"""

import argparse
import json
import logging
import sys
from pathlib import Path

import matplotlib
import numpy as np
from threadpoolctl import threadpool_limits

from .benchmark import DatasetEvaluator, save_report
from .clustering import cluster_image, labels_to_reflectance
from .config import METHODS, PRESETS, config, dump_config, load_pipeline_config, setup_logging
from .crf import decompose
from .errors import ConfigError, IIDError
from .params import FUSIONS, LINEARIZATIONS
from .rasters import read_image, write_image, write_labels, write_png
from .ratios import count_distinct_colors, ratio_field, significance_mask
from .synth import SHADING_KINDS, make_scene, save_scene

logger = logging.getLogger(__name__)


def _write_json(path: str | Path, payload: dict) -> Path:
    """JSON determinista: claves ordenadas y sin marcas de tiempo"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    return path


def _parse_k(value: str):
    if value == "auto":
        return value
    try:
        return int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"k debe ser 'auto' o un entero, recibido {value!r}")


def _parse_size(value: str):
    try:
        width, height = (int(v) for v in value.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"Tamaño con formato WxH, recibido {value!r}")
    return width, height


def _parse_triple(value: str):
    try:
        triple = tuple(float(v) for v in value.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"Se esperaban tres números separados por comas, recibido {value!r}")
    if len(triple) != 3:
        raise argparse.ArgumentTypeError(f"Se esperaban tres componentes, recibido {value!r}")
    return triple


def _set(tree: dict, dotted: str, value) -> None:
    """Añade una sobreescritura sólo si el flag fue dado"""
    if value is None:
        return
    node = tree
    *parents, leaf = dotted.split(".")
    for key in parents:
        node = node.setdefault(key, {})
    node[leaf] = value


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="Archivo JSON con la configuración del pipeline")
    parser.add_argument("--preset", choices=sorted(PRESETS), help="Preset por dataset")
    parser.add_argument("--method", choices=sorted(METHODS), help="Variante del método")
    parser.add_argument("--linearization", choices=LINEARIZATIONS, help="Linealización de la entrada")


def _add_pipeline_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--k", type=_parse_k, help="Número de clusters o 'auto'")
    parser.add_argument("--ratio-weight", type=float, help="Peso de las columnas de razones")
    parser.add_argument("--seed", type=int, help="Semilla de k-means y del CRF")
    parser.add_argument("--iterations", type=int, help="Iteraciones de campo medio")
    parser.add_argument("--guided", action="store_true", default=None, help="Post-procesar con filtro guiado")


def _pipeline_overrides(args) -> dict:
    overrides: dict = {}
    _set(overrides, "linearization", getattr(args, "linearization", None))
    _set(overrides, "clustering.k", getattr(args, "k", None))
    _set(overrides, "clustering.ratio_weight", getattr(args, "ratio_weight", None))
    _set(overrides, "clustering.seed", getattr(args, "seed", None))
    _set(overrides, "crf.seed", getattr(args, "seed", None))
    _set(overrides, "crf.iterations", getattr(args, "iterations", None))
    _set(overrides, "guided_filter.enabled", getattr(args, "guided", None))
    return overrides


def _resolve(args, overrides: dict):
    cfg = load_pipeline_config(
        path=getattr(args, "config", None),
        preset=getattr(args, "preset", None),
        method=getattr(args, "method", None),
        overrides=overrides,
    )
    logger.info(f"Configuración resuelta: {dump_config(cfg)}")
    return cfg


def _scalar_info(info: dict) -> dict:
    """Sólo lo serializable de Decomposition.info (las máscaras quedan fuera)"""
    return {k: v for k, v in info.items() if not isinstance(v, np.ndarray)}


def cmd_decompose(args) -> int:
    overrides = _pipeline_overrides(args)
    _set(overrides, "output.write_raw", True if args.raw else None)
    cfg = _resolve(args, overrides)

    image = read_image(args.input, cfg.linearization)
    decomposition, energy = decompose(image, cfg)

    normalize = cfg.output.normalize
    write_image(args.out_r, decomposition.reflectance, normalize=normalize)
    write_image(args.out_s, decomposition.shading, normalize=normalize)
    if cfg.output.write_raw:
        write_image(Path(args.out_r).with_suffix(".iidf"), decomposition.reflectance)
        write_image(Path(args.out_s).with_suffix(".iidf"), decomposition.shading)

    if args.report:
        _write_json(args.report, {
            "config": cfg.to_dict(),
            "degraded": decomposition.degraded,
            "info": _scalar_info(decomposition.info),
            "energy": energy.to_dict() if energy is not None else None,
        })
    logger.info(f"Intrínsecos escritos en {args.out_r} y {args.out_s}")
    return 0


def cmd_retinex(args) -> int:
    overrides = {"pipeline": "retinex"}
    _set(overrides, "linearization", args.linearization)
    _set(overrides, "retinex.use_ccr", args.ccr)
    _set(overrides, "retinex.t_brightness", args.tb)
    _set(overrides, "retinex.t_chroma", args.tc)
    _set(overrides, "retinex.ccr_threshold", args.threshold)
    _set(overrides, "retinex.sigma", args.sigma)
    cfg = _resolve(args, overrides)

    image = read_image(args.input, cfg.linearization)
    decomposition, _ = decompose(image, cfg)
    write_image(args.out_r, decomposition.reflectance, normalize=cfg.output.normalize)
    write_image(args.out_s, decomposition.shading, normalize=cfg.output.normalize)

    if decomposition.degraded:
        logger.warning("La reconstrucción de Poisson no convergió; resultado degradado")
    if args.report:
        _write_json(args.report, {
            "config": cfg.to_dict(),
            "degraded": decomposition.degraded,
            "info": _scalar_info(decomposition.info),
        })
    return 0


def cmd_ratios(args) -> int:
    overrides: dict = {}
    _set(overrides, "linearization", args.linearization)
    _set(overrides, "ratios.sigma", args.sigma)
    _set(overrides, "ratios.threshold", args.threshold)
    _set(overrides, "ratios.fusion", args.fusion)
    cfg = _resolve(args, overrides)
    params = cfg.ratios

    image = read_image(args.input, cfg.linearization)
    field = ratio_field(image, params.sigma, params.fusion)
    mask = significance_mask(field, params.threshold)

    peak = float(field.fused.max())
    display = field.fused / peak if peak > 0 else field.fused
    if args.colormap:
        display = matplotlib.colormaps[args.colormap](display)[..., :3]
    write_png(args.out, display, normalize=False)
    if args.mask:
        write_png(args.mask, mask.astype(np.float64), normalize=False)

    if args.report:
        _write_json(args.report, {
            "config": cfg.to_dict(),
            "fused_max": peak,
            "significant_fraction": float(mask.mean()),
            "distinct_colors": count_distinct_colors(image, params.k_max),
        })
    logger.info(f"Mapa de razones: {int(mask.sum())} píxeles significativos de {mask.size}")
    return 0


def cmd_cluster(args) -> int:
    overrides: dict = {}
    _set(overrides, "linearization", args.linearization)
    _set(overrides, "clustering.k", args.k)
    _set(overrides, "clustering.ratio_weight", args.ratio_weight)
    _set(overrides, "clustering.seed", args.seed)
    _set(overrides, "clustering.use_ratios", args.use_ratios)
    cfg = _resolve(args, overrides)

    image = read_image(args.input, cfg.linearization)
    feats, model = cluster_image(image, cfg.clustering)
    write_labels(args.out, model.assignment.reshape(feats.height, feats.width))
    if args.out_r:
        write_image(args.out_r, labels_to_reflectance(image, model), normalize=cfg.output.normalize)

    if args.report:
        _write_json(args.report, {
            "config": cfg.to_dict(),
            "k": int(model.k),
            "objective": float(model.objective),
            "iterations": int(model.n_iter),
            "sizes": np.bincount(model.assignment, minlength=model.k).tolist(),
        })
    return 0


def cmd_synth(args) -> int:
    width, height = args.size
    scene = make_scene(width, height, args.colors, args.shading, args.seed, args.illuminant)
    save_scene(scene, args.out_dir)
    return 0


def cmd_eval(args) -> int:
    cfg = _resolve(args, _pipeline_overrides(args))
    evaluator = DatasetEvaluator(cfg, method=args.method or "custom", threads=args.threads,
                                 progress=not args.no_progress)

    if args.dataset == "mit":
        report = evaluator.evaluate_mit(args.dataset_dir)
    elif args.dataset == "iiw":
        report = evaluator.evaluate_iiw(args.images_dir, args.judgments_dir)
    else:
        report = evaluator.evaluate_shadow(args.dataset_dir, args.layout, args.split)

    path = Path(args.report) if args.report else config.REPORTS_DIR / f"{args.dataset}_report.json"
    save_report(report, path, plots=args.plots)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iid",
        description="Descomposición intrínseca con invariantes de razones cruzadas de color",
    )
    parser.add_argument("--log-level", help="Nivel de logging (por defecto IID_LOG_LEVEL)")
    commands = parser.add_subparsers(dest="command", required=True)

    p = commands.add_parser("decompose", help="Pipeline completo: clustering + CRF")
    p.add_argument("input")
    p.add_argument("--out-r", required=True, help="Reflectancia de salida (.png o .iidf)")
    p.add_argument("--out-s", required=True, help="Sombreado de salida (.png o .iidf)")
    p.add_argument("--report", help="JSON con la energía por iteración")
    p.add_argument("--raw", action="store_true", help="Escribir además .iidf sin pérdidas")
    _add_config_flags(p)
    _add_pipeline_flags(p)
    p.set_defaults(handler=cmd_decompose)

    p = commands.add_parser("retinex", help="Color Retinex, opcionalmente asistido por CCR")
    p.add_argument("input")
    p.add_argument("--ccr", action=argparse.BooleanOptionalAction, default=None,
                   help="Fusionar la máscara de razones cruzadas")
    p.add_argument("--tb", type=float, help="Umbral de gradiente de brillo")
    p.add_argument("--tc", type=float, help="Umbral de gradiente de cromaticidad")
    p.add_argument("--threshold", type=float, help="Umbral de significancia CCR")
    p.add_argument("--sigma", type=float, help="Sigma del suavizado previo a las razones")
    p.add_argument("--out-r", required=True)
    p.add_argument("--out-s", required=True)
    p.add_argument("--report")
    _add_config_flags(p)
    p.set_defaults(handler=cmd_retinex)

    p = commands.add_parser("ratios", help="Mapa fusionado de razones cruzadas y máscara")
    p.add_argument("input")
    p.add_argument("--sigma", type=float)
    p.add_argument("--threshold", type=float)
    p.add_argument("--fusion", choices=FUSIONS)
    p.add_argument("--out", required=True, help="Mapa fusionado normalizado para visualización")
    p.add_argument("--mask", help="Máscara binaria de significancia")
    p.add_argument("--colormap", help="Mapa de color de matplotlib para el mapa fusionado")
    p.add_argument("--report")
    _add_config_flags(p)
    p.set_defaults(handler=cmd_ratios)

    p = commands.add_parser("cluster", help="k-means con k fijo o adaptativo")
    p.add_argument("input")
    p.add_argument("--k", type=_parse_k)
    p.add_argument("--ratio-weight", type=float)
    p.add_argument("--use-ratios", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="Mapa de etiquetas (PNG 16 bits)")
    p.add_argument("--out-r", help="Reflectancia por cluster")
    p.add_argument("--report")
    _add_config_flags(p)
    p.set_defaults(handler=cmd_cluster)

    p = commands.add_parser("synth", help="Escena sintética con verdad de terreno")
    p.add_argument("--size", type=_parse_size, default=(128, 128), help="WxH")
    p.add_argument("--colors", type=int, default=5)
    p.add_argument("--shading", choices=SHADING_KINDS, default="mixed")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--illuminant", type=_parse_triple, default=(1.0, 1.0, 1.0), help="r,g,b")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(handler=cmd_synth)

    p = commands.add_parser("eval", help="Evaluación sobre datasets")
    datasets = p.add_subparsers(dest="dataset", required=True)
    for name, help_text in (("mit", "LMSE sobre MIT"), ("iiw", "WHDR sobre IIW"),
                            ("shadow", "Consistencia de sombra sobre ISTD/SRD")):
        q = datasets.add_parser(name, help=help_text)
        if name == "iiw":
            q.add_argument("images_dir")
            q.add_argument("judgments_dir")
        else:
            q.add_argument("dataset_dir")
        if name == "shadow":
            q.add_argument("--layout", choices=("istd", "srd"), default="istd")
            q.add_argument("--split", default="test")
        q.add_argument("--report", help="Ruta de report.json (junto a él se escribe el CSV)")
        q.add_argument("--plots", action="store_true", help="Histograma de errores")
        q.add_argument("--threads", type=int, help="Hilos de evaluación (por defecto IID_THREADS)")
        q.add_argument("--no-progress", action="store_true")
        _add_config_flags(q)
        _add_pipeline_flags(q)
        q.set_defaults(handler=cmd_eval)

    return parser


def run(argv=None) -> int:
    """Ejecuta la CLI y devuelve el código de salida"""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    setup_logging(args.log_level.upper() if args.log_level else None)
    try:
        config.validate_env()
    except ValueError as e:
        logger.error(str(e))
        return 2

    try:
        with threadpool_limits(limits=config.THREADS):
            return args.handler(args)
    except ConfigError as e:
        logger.error(f"Configuración inválida: {e}")
        return 2
    except (IIDError, OSError) as e:
        logger.error(f"Error: {e}")
        return 1


def main():
    """Función principal"""
    return run(sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())

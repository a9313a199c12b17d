"""Command-line experiment runner and model tool.

Subcommands: ``train`` (fit a DES ensemble on one dataset and serialize it),
``predict`` (classify rows with a saved model), ``benchmark`` (compare
competence methods over datasets with the full statistical report) and
``inspect-model``.

Exit codes: 0 success, 2 configuration error, 3 data/model error, 4 partial
benchmark failure.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import hashlib
import json
import logging
import os
import sys
from dataclasses import replace

from .config import ConfigError, ExperimentConfig, apply_overrides, load_config
from .crossval import (CvConfig, DatasetResult, MethodSpec, effective_folds,
                       evaluate_fold, reduce_fold_results, stratified_split)
from .ensemble import classify_batch, classify_explain, train_des
from .ingest import IngestError, load_dataset, parse_feature_rows
from .model_io import FORMAT_VERSION, ModelError, load_model, save_model
from .report import (build_report, render_criteria_tsv, render_text,
                     report_to_json, table_from_results)
from .seeding import derive_seed

log = logging.getLogger("descomp")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_PARTIAL = 4


def _add_common_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="INI experiment configuration file")
    sub.add_argument("--seed", type=int, help="master seed (required unless set in config)")
    sub.add_argument("--workers", type=int, help="bounded worker count for benchmark runs")
    sub.add_argument("--out", help="output path (model file or report directory)")
    sub.add_argument("--method",
                     help="competence method(s): bootstrap, rrc_beta, rrc_gaussian")
    sub.add_argument("--alpha", type=float, help="selection threshold (default 1/M)")
    sub.add_argument("--k-bootstrap", dest="k_bootstrap", type=int,
                     help="bootstrap replicas per classifier")
    sub.add_argument("--mc-samples", dest="mc_samples", type=int,
                     help="Monte-Carlo draws for the rrc methods")
    sub.add_argument("--sigma-scale", dest="sigma_scale", type=float,
                     help="standard-deviation scale of the truncated-Gaussian draws")
    sub.add_argument("--variance-threshold", dest="variance_threshold", type=float,
                     help="PCA explained-variance threshold")
    sub.add_argument("--folds", type=int, help="cross-validation folds")
    sub.add_argument("--repeats", type=int, help="cross-validation repeats")
    sub.add_argument("--mcp", choices=("bergman-hommel", "holm"),
                     help="multiplicity-control procedure")
    sub.add_argument("--class-attribute", dest="class_attribute",
                     help="class attribute name, or 'last'")
    sub.add_argument("--csv-header", dest="csv_header", action="store_true",
                     default=None, help="treat the first CSV row as a header")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="descomp",
        description="dynamic ensemble selection with resampling-based competence")
    subparsers = parser.add_subparsers(dest="command", required=True)

    p_train = subparsers.add_parser("train", help="train and serialize an ensemble")
    p_train.add_argument("dataset", help="ARFF or CSV dataset file")
    _add_common_flags(p_train)
    p_train.set_defaults(func=cmd_train)

    p_predict = subparsers.add_parser("predict", help="classify rows with a saved model")
    p_predict.add_argument("model", help="model file written by 'train'")
    p_predict.add_argument("input", help="ARFF or CSV file of feature rows")
    p_predict.add_argument("--explain", action="store_true",
                           help="emit selected members, competences and fused supports")
    _add_common_flags(p_predict)
    p_predict.set_defaults(func=cmd_predict)

    p_bench = subparsers.add_parser("benchmark", help="compare methods across datasets")
    p_bench.add_argument("datasets", nargs="*",
                         help="dataset files (extends [data] paths from the config)")
    _add_common_flags(p_bench)
    p_bench.set_defaults(func=cmd_benchmark)

    p_inspect = subparsers.add_parser("inspect-model", help="print model metadata")
    p_inspect.add_argument("model")
    p_inspect.set_defaults(func=cmd_inspect)

    return parser


def _resolve_config(args) -> ExperimentConfig:
    if getattr(args, "config", None):
        config = load_config(args.config)
    else:
        if getattr(args, "seed", None) is None:
            raise ConfigError("a master seed is required (--seed or [run] seed)")
        config = ExperimentConfig(seed=args.seed)
    config = apply_overrides(config, args)
    if getattr(args, "class_attribute", None):
        config = replace(config, class_attribute=args.class_attribute)
    if getattr(args, "csv_header", None):
        config = replace(config, csv_header=True)
    return config


def _single_method(config: ExperimentConfig, args) -> str:
    if getattr(args, "method", None):
        methods = tuple(t.strip() for t in args.method.split(","))
    else:
        methods = config.methods
    if len(methods) == 1:
        return methods[0]
    if getattr(args, "method", None):
        raise ConfigError("train expects exactly one --method")
    log.info("no single method configured; defaulting to bootstrap")
    return "bootstrap"


def cmd_train(args) -> int:
    config = _resolve_config(args)
    method = _single_method(config, args)
    dataset = load_dataset(args.dataset, class_attribute=config.class_attribute,
                           csv_header=config.csv_header)
    train_idx, val_idx = stratified_split(
        dataset.labels, config.train_fraction,
        derive_seed(config.seed, "train-split"))
    ensemble = train_des(
        config.pool, dataset.subset(train_idx), dataset.subset(val_idx),
        method=method, params=config.method_params, seed=config.seed,
        alpha=config.alpha, variance_threshold=config.variance_threshold)
    for spec, fld in zip(config.pool, ensemble.fields):
        values = fld.sources.values
        log.info("competence[%s]: n=%d min=%.4f mean=%.4f max=%.4f",
                 spec.name, values.size, values.min(), values.mean(), values.max())
    out = args.out or (os.path.splitext(os.path.basename(args.dataset))[0] + ".desmodel")
    save_model(ensemble, out)
    log.info("model written to %s (method=%s, pool=%d, alpha=%.4f)",
             out, method, ensemble.pool_size, ensemble.alpha)
    print(out)
    return EXIT_OK


def cmd_predict(args) -> int:
    ensemble = load_model(args.model)
    ext = os.path.splitext(args.input)[1].lower().lstrip(".")
    if ext not in ("arff", "csv"):
        raise IngestError(f"unsupported input extension {ext!r}")
    with open(args.input, "r", encoding="utf-8") as fh:
        text = fh.read()
    rows = parse_feature_rows(text, ext, ensemble.attribute_meta,
                              header=bool(getattr(args, "csv_header", False)))
    names = ensemble.class_names or tuple(str(i) for i in range(ensemble.n_classes))
    lines = []
    if args.explain:
        for r in range(rows.shape[0]):
            trace = classify_explain(ensemble, rows[r])
            lines.append(json.dumps({
                "row": r,
                "label": names[trace.label],
                "label_index": trace.label,
                "selected": list(trace.selected),
                "competences": list(trace.competences),
                "fused_supports": list(trace.fused),
                "fused_raw": list(trace.fused_raw),
                "fallback_used": trace.fallback_used,
            }, sort_keys=True))
    else:
        labels = classify_batch(ensemble, rows)
        lines = [names[int(v)] for v in labels]
    output = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(output)
    else:
        sys.stdout.write(output)
    return EXIT_OK


def _dataset_cache_key(path: str, config: ExperimentConfig) -> str:
    with open(path, "rb") as fh:
        content = fh.read()
    relevant = {
        "seed": config.seed,
        "class_attribute": config.class_attribute,
        "csv_header": config.csv_header,
        "pool": [spec.name for spec in config.pool],
        "methods": list(config.methods),
        "k_bootstrap": config.k_bootstrap,
        "mc_samples": config.mc_samples,
        "sigma_scale": config.sigma_scale,
        "alpha": config.alpha,
        "variance_threshold": config.variance_threshold,
        "preprocess_scope": config.preprocess_scope,
        "folds": config.folds,
        "repeats": config.repeats,
        "split": config.split,
    }
    h = hashlib.sha256()
    h.update(content)
    h.update(json.dumps(relevant, sort_keys=True).encode())
    return h.hexdigest()[:16]


def _result_to_json(result: DatasetResult) -> dict:
    return {"methods": list(result.methods), "losses": result.losses,
            "raw": result.raw, "folds_used": result.folds_used,
            "repeats": result.repeats, "warnings": list(result.warnings)}


def _result_from_json(data: dict) -> DatasetResult:
    return DatasetResult(
        methods=tuple(data["methods"]), losses=data["losses"], raw=data["raw"],
        folds_used=int(data["folds_used"]), repeats=int(data["repeats"]),
        warnings=list(data["warnings"]))


def cmd_benchmark(args) -> int:
    config = _resolve_config(args)
    paths = list(config.dataset_paths) + list(getattr(args, "datasets", []) or [])
    if not paths:
        raise ConfigError("benchmark needs at least one dataset "
                          "(positional or [data] paths)")
    method_specs = [MethodSpec(name, config.method_params, config.alpha)
                    for name in config.methods]
    if len(method_specs) < 2:
        log.warning("only one method configured: criteria are reported "
                    "without statistical test sections")
    cv = CvConfig(folds=config.folds, repeats=config.repeats,
                  train_fraction=config.train_fraction,
                  variance_threshold=config.variance_threshold,
                  preprocess_scope=config.preprocess_scope)

    out_dir = config.output if args.out is None else args.out
    cache_dir = os.path.join(out_dir, ".cache")
    os.makedirs(cache_dir, exist_ok=True)

    # pass 1: resolve cache hits and queue (dataset, repeat, fold) work units
    entries = []  # (name, cache_file, result | None, dataset, folds_used, warning)
    failures = []
    for path in paths:
        name = os.path.splitext(os.path.basename(path))[0]
        try:
            key = _dataset_cache_key(path, config)
            cache_file = os.path.join(cache_dir, f"{name}-{key}.json")
            if os.path.exists(cache_file):
                with open(cache_file, "r", encoding="utf-8") as fh:
                    result = _result_from_json(json.load(fh))
                log.info("cache hit for %s (%s)", name, key)
                entries.append((name, cache_file, result, None, 0, None))
                continue
            dataset = load_dataset(path, class_attribute=config.class_attribute,
                                   csv_header=config.csv_header)
            folds_used, warning = effective_folds(dataset.labels, cv.folds)
            entries.append((name, cache_file, None, dataset, folds_used, warning))
        except (OSError, IngestError, ValueError) as exc:
            failures.append(f"{name}: {exc}")
            log.error("dataset %s failed: %s", name, exc)

    # pass 2: evaluate all pending folds, across datasets and folds alike
    tasks = [(i, repeat, fold)
             for i, entry in enumerate(entries) if entry[2] is None
             for repeat in range(cv.repeats)
             for fold in range(entry[4])]
    fold_results: dict[int, list] = {}
    errors: dict[int, str] = {}

    def record(index, outcome, error=None):
        if error is not None:
            errors.setdefault(index, str(error))
        else:
            fold_results.setdefault(index, []).append(outcome)

    if config.workers > 1 and tasks:
        with concurrent.futures.ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = {
                pool.submit(evaluate_fold, entries[i][3], config.pool, method_specs,
                            cv, config.seed, entries[i][4], repeat, fold): i
                for i, repeat, fold in tasks}
            for future in concurrent.futures.as_completed(futures):
                i = futures[future]
                try:
                    record(i, future.result())
                except Exception as exc:  # per-dataset failure, run continues
                    record(i, None, exc)
    else:
        for i, repeat, fold in tasks:
            if i in errors:
                continue
            try:
                record(i, evaluate_fold(entries[i][3], config.pool, method_specs,
                                        cv, config.seed, entries[i][4], repeat, fold))
            except Exception as exc:
                record(i, None, exc)

    # pass 3: reduce per dataset (sorted inside the reducer), cache, assemble
    names, results = [], []
    for i, (name, cache_file, cached, dataset, folds_used, warning) in enumerate(entries):
        if cached is not None:
            names.append(name)
            results.append(cached)
            continue
        if i in errors:
            failures.append(f"{name}: {errors[i]}")
            log.error("dataset %s failed: %s", name, errors[i])
            continue
        result = reduce_fold_results(method_specs, fold_results[i], folds_used,
                                     cv.repeats, warnings=[warning] if warning else [])
        tmp = cache_file + ".tmp"
        with open(tmp, "w", encoding="utf-8") as fh:
            json.dump(_result_to_json(result), fh, sort_keys=True)
        os.replace(tmp, cache_file)  # atomic: a killed run never leaves a
        log.info("evaluated %s", name)  # truncated cache entry behind
        names.append(name)
        results.append(result)

    if not results:
        log.error("no dataset produced results")
        return EXIT_DATA

    warnings = [f"failed: {msg}" for msg in failures]
    for name, result in zip(names, results):
        for note in result.warnings:
            warnings.append(f"{name}: {note}")
    table = table_from_results(names, results)
    report = build_report(table, alpha=config.significance_level,
                          procedure=config.mcp, config_echo=config.echo_items(),
                          warnings=warnings)
    with open(os.path.join(out_dir, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(render_text(report))
    with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8") as fh:
        fh.write(report_to_json(report))
    with open(os.path.join(out_dir, "criteria.tsv"), "w", encoding="utf-8") as fh:
        fh.write(render_criteria_tsv(table))
    log.info("report written to %s", out_dir)
    return EXIT_PARTIAL if failures else EXIT_OK


def cmd_inspect(args) -> int:
    ensemble = load_model(args.model)
    lines = [
        f"format version: {FORMAT_VERSION}",
        f"method: {ensemble.method}",
        f"seed: {ensemble.seed}",
        f"alpha: {ensemble.alpha!r}",
        f"classes: {ensemble.n_classes}"
        + (f" ({', '.join(ensemble.class_names)})" if ensemble.class_names else ""),
        f"feature space: {len(ensemble.attribute_meta)} raw -> "
        f"{ensemble.pipeline.output_dim} after preprocessing",
        f"params: k_bootstrap={ensemble.params.k_bootstrap} "
        f"mc_samples={ensemble.params.mc_samples} "
        f"sigma_scale={ensemble.params.sigma_scale!r}",
        f"pool ({ensemble.pool_size}):",
    ]
    for clf, fld in zip(ensemble.pool, ensemble.fields):
        values = fld.sources.values
        lines.append(
            f"  {clf.spec.name}: competence sources n={values.size} "
            f"min={values.min():.4f} mean={values.mean():.4f} max={values.max():.4f}")
    print("\n".join(lines))
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (IngestError, ModelError) as exc:
        log.error("data error: %s", exc)
        return EXIT_DATA
    except OSError as exc:
        log.error("i/o error: %s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

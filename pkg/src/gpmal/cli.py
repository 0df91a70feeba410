"""Command-line entry point and experiment orchestration.

Subcommands:
  evolve    run the evolutionary search per (d, K, repeat), writing
            result.json / embedding.csv / model.gp / history.csv per run
  eval      cross-validated classification accuracy of an embedding CSV
  metrics   neighbourhood-quality report (JSON) for an embedding CSV
  sweep-k   accuracy table over a list of K values with min-max scaling
  compare   per-d comparison: evolved mappings vs PCA vs all features

Options may come from a JSON config file (--config); explicit flags win.
Exit codes: 0 success, 1 usage or configuration error, 2 data error.
GPMAL_THREADS caps fitness-evaluation parallelism.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
import numpy as np

from .dataset import DataError, Dataset, load_csv, scale_min_max, stratified_folds
from .evaluation import cv_accuracy
from .evolve import EvolutionConfig, RunResult, evolve, evolve_hnsw_params
from .metrics import quality_report
from .pca import pca_fit, pca_transform
from .trees import individual_to_text


class ConfigError(Exception):
    """Bad flags or configuration values."""


def _atomic_write(path: str, text: str):
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _csv_text(header, rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_cell(v) for v in row))
    return "\n".join(lines) + "\n"


def _cell(v) -> str:
    if isinstance(v, float):
        return repr(float(v))  # shortest round-trip form, plain '.' decimals
    return str(v)


def _int_list(text: str) -> list[int]:
    try:
        values = [int(tok) for tok in str(text).split(",") if tok.strip() != ""]
    except ValueError:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from None
    if not values:
        raise ConfigError(f"empty list: {text!r}")
    return values


def _label_col(value):
    try:
        return int(value)
    except (TypeError, ValueError):
        return value


def _load_dataset(args) -> Dataset:
    if not args.dataset:
        raise ConfigError("--dataset is required")
    if not os.path.exists(args.dataset):
        raise DataError(f"dataset path does not exist: {args.dataset}")
    raw = load_csv(args.dataset, _label_col(args.label_col),
                   has_header=not args.no_header)
    return scale_min_max(raw)


def _read_embedding(path: str) -> np.ndarray:
    """Read an embedding CSV, ignoring any trailing ``label`` column."""
    if not os.path.exists(path):
        raise DataError(f"embedding path does not exist: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 2:
        raise DataError(f"{path}: no embedding rows")
    header = rows[0]
    dims = [j for j, name in enumerate(header) if name != "label"]
    try:
        data = [[float(row[j]) for j in dims] for row in rows[1:]]
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}: malformed embedding row: {exc}") from exc
    return np.asarray(data, dtype=np.float64)


def _evolution_config(args, d: int, K: int, seed: int) -> EvolutionConfig:
    elitism = args.elitism
    if elitism is None:
        elitism = min(10, args.pop // 10)  # top-10 at the default size
    return EvolutionConfig(
        d=d,
        population_size=args.pop,
        generations=args.gens,
        K=K,
        seed=seed,
        elitism_count=elitism,
        hnsw=evolve_hnsw_params(K, args.ef_search),
        exact_fitness=args.exact_nn,
    )


def _write_run(out_dir: str, result: RunResult, labels, elapsed_s: float):
    os.makedirs(out_dir, exist_ok=True)
    payload = {
        "config": result.config_echo,
        "seed": result.seed,
        "best_fitness": result.best_fitness,
        "history": [[b, m] for b, m in result.history],
        "model": individual_to_text(result.best).splitlines(),
        "timing": {"elapsed_seconds": elapsed_s},
    }
    _atomic_write(os.path.join(out_dir, "result.json"),
                  json.dumps(payload, indent=2, sort_keys=True) + "\n")
    _atomic_write(os.path.join(out_dir, "model.gp"),
                  individual_to_text(result.best))
    d = result.embedding.shape[1]
    header = [f"dim_{t}" for t in range(d)] + ["label"]
    rows = [list(result.embedding[i]) + [labels[i]]
            for i in range(result.embedding.shape[0])]
    _atomic_write(os.path.join(out_dir, "embedding.csv"), _csv_text(header, rows))
    hist = [[g, b, m] for g, (b, m) in enumerate(result.history)]
    _atomic_write(os.path.join(out_dir, "history.csv"),
                  _csv_text(["gen", "best_fitness", "mean_fitness"], hist))


def cmd_evolve(args) -> int:
    data = _load_dataset(args)
    if not args.out:
        raise ConfigError("--out is required for evolve")
    ds = _int_list(args.d)
    ks = _int_list(args.k)
    for d in ds:
        for K in ks:
            for rep in range(args.repeats):
                seed = args.seed + rep
                config = _evolution_config(args, d, K, seed)
                t0 = time.perf_counter()
                result = evolve(config, data)
                elapsed = time.perf_counter() - t0
                run_dir = os.path.join(args.out, f"d{d}_k{K}_r{rep}")
                _write_run(run_dir, result, data.labels, elapsed)
                print(f"{run_dir}: best_fitness={result.best_fitness}")
    return 0


def cmd_eval(args) -> int:
    data = _load_dataset(args)
    emb = _read_embedding(args.embedding)
    if emb.shape[0] != data.n_instances:
        raise DataError(f"embedding has {emb.shape[0]} rows, dataset has "
                        f"{data.n_instances}")
    folds = stratified_folds(data, args.folds, args.seed)
    report = cv_accuracy(emb, data.labels, folds, classifier=args.classifier,
                         knn_k=args.knn_k, n_trees=args.rf_trees, seed=args.seed)
    text = report.to_json()
    print(text)
    if args.out:
        _atomic_write(args.out, text + "\n")
    return 0


def cmd_metrics(args) -> int:
    data = _load_dataset(args)
    emb = _read_embedding(args.embedding)
    if emb.shape[0] != data.n_instances:
        raise DataError(f"embedding has {emb.shape[0]} rows, dataset has "
                        f"{data.n_instances}")
    if not 0.0 <= args.lam <= 1.0:
        raise ConfigError(f"--lam must be in [0, 1], got {args.lam}")
    report = quality_report(data.features, emb, K=args.k_single, lam=args.lam)
    text = report.to_json()
    print(text)
    if args.out:
        _atomic_write(args.out, text + "\n")
    return 0


def _accuracy_of_run(args, data: Dataset, d: int, K: int, seed: int,
                     folds) -> float:
    config = _evolution_config(args, d, K, seed)
    result = evolve(config, data)
    report = cv_accuracy(result.embedding, data.labels, folds,
                         classifier=args.classifier, knn_k=args.knn_k,
                         n_trees=args.rf_trees, seed=args.seed)
    return report.mean_accuracy


def _scale_unit(values: list[float]) -> list[float]:
    lo = min(values)
    hi = max(values)
    if hi == lo:
        return [1.0 for _ in values]
    return [(v - lo) / (hi - lo) for v in values]


def cmd_sweep_k(args) -> int:
    data = _load_dataset(args)
    folds = stratified_folds(data, args.folds, args.seed)
    ds = _int_list(args.d)
    ks = _int_list(args.k)
    cells = {}
    for K in ks:
        for d in ds:
            accs = [_accuracy_of_run(args, data, d, K, args.seed + rep, folds)
                    for rep in range(args.repeats)]
            cells[(K, d)] = float(np.mean(accs))
    per_k = [float(np.mean([cells[(K, d)] for d in ds])) for K in ks]
    scaled = _scale_unit(per_k)
    rows = []
    for i, K in enumerate(ks):
        for d in ds:
            rows.append([K, d, cells[(K, d)], scaled[i]])
    text = _csv_text(["k", "d", "mean_accuracy", "k_scaled_accuracy"], rows)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _atomic_write(os.path.join(args.out, "sweep_k.csv"), text)
    print(text, end="")
    return 0


def cmd_compare(args) -> int:
    data = _load_dataset(args)
    folds = stratified_folds(data, args.folds, args.seed)
    ds = _int_list(args.d)
    K = _int_list(args.k)[0]
    all_feat = cv_accuracy(data.features, data.labels, folds,
                           classifier=args.classifier, knn_k=args.knn_k,
                           n_trees=args.rf_trees, seed=args.seed).mean_accuracy
    rows = []
    for d in ds:
        accs = [_accuracy_of_run(args, data, d, K, args.seed + rep, folds)
                for rep in range(args.repeats)]
        model = pca_fit(data, d)
        pca_emb = pca_transform(model, data)
        pca_acc = cv_accuracy(pca_emb, data.labels, folds,
                              classifier=args.classifier, knn_k=args.knn_k,
                              n_trees=args.rf_trees, seed=args.seed).mean_accuracy
        rows.append([d, float(np.mean(accs)), float(np.std(accs)),
                     float(np.min(accs)), float(np.max(accs)), pca_acc, all_feat])
    text = _csv_text(["d", "gp_mean", "gp_std", "gp_min", "gp_max",
                      "pca_accuracy", "all_features_accuracy"], rows)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        _atomic_write(os.path.join(args.out, "compare.csv"), text)
    print(text, end="")
    return 0


_COMMANDS = {
    "evolve": cmd_evolve,
    "eval": cmd_eval,
    "metrics": cmd_metrics,
    "sweep-k": cmd_sweep_k,
    "compare": cmd_compare,
}

# flag name -> (config file key, type coercion)
_CONFIG_KEYS = {
    "dataset": str, "label_col": _label_col, "d": str, "k": str,
    "pop": int, "gens": int, "seed": int, "repeats": int, "out": str,
    "classifier": str, "ef_search": int, "exact_nn": bool, "folds": int,
    "knn_k": int, "rf_trees": int, "lam": float, "embedding": str,
    "k_single": int, "no_header": bool, "elitism": int,
}

_DEFAULTS = {
    "label_col": "label", "d": "2", "k": "30", "pop": 100, "gens": 1000,
    "seed": 0, "repeats": 30, "classifier": "knn", "exact_nn": False,
    "folds": 10, "knn_k": 5, "rf_trees": 100, "lam": 0.5, "k_single": 30,
    "no_header": False, "out": None, "dataset": None, "embedding": None,
    "ef_search": None, "elitism": None,
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gpmal",
        description="Evolve interpretable low-dimensional embeddings that "
                    "preserve local neighbourhood topology.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="JSON config file; "
                       "explicit flags override its values")
        p.add_argument("--dataset", default=None)
        p.add_argument("--label-col", dest="label_col", default=None,
                       help="label column name or 0-based index")
        p.add_argument("--no-header", dest="no_header", action="store_true",
                       default=None)
        p.add_argument("--d", default=None, help="embedding dims, e.g. 2 or 1,2,5")
        p.add_argument("--k", default=None, help="neighbourhood size(s)")
        p.add_argument("--pop", type=int, default=None)
        p.add_argument("--gens", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--repeats", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--classifier", choices=("knn", "rf"), default=None)
        p.add_argument("--ef-search", dest="ef_search", type=int, default=None)
        p.add_argument("--elitism", type=int, default=None)
        p.add_argument("--exact-nn", dest="exact_nn", action="store_true",
                       default=None, help="rank embeddings by brute force")
        p.add_argument("--folds", type=int, default=None)
        p.add_argument("--knn-k", dest="knn_k", type=int, default=None)
        p.add_argument("--rf-trees", dest="rf_trees", type=int, default=None)
        p.add_argument("--lam", type=float, default=None,
                       help="T&C scalarisation weight in [0, 1]")
        p.add_argument("--k-single", dest="k_single", type=int, default=None,
                       help="neighbourhood size for the metrics report")
        p.add_argument("--embedding", default=None, help="embedding CSV path")
    return parser


def _merge_config(args: argparse.Namespace) -> argparse.Namespace:
    file_values = {}
    if args.config:
        if not os.path.exists(args.config):
            raise ConfigError(f"config file does not exist: {args.config}")
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{args.config}: invalid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{args.config}: top level must be an object")
        for key, value in raw.items():
            norm = key.replace("-", "_")
            if norm not in _CONFIG_KEYS:
                raise ConfigError(f"{args.config}: unknown key {key!r}")
            file_values[norm] = _CONFIG_KEYS[norm](value)
    for key in _CONFIG_KEYS:
        if getattr(args, key, None) is None:
            setattr(args, key, file_values.get(key, _DEFAULTS[key]))
    return args


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        args = _merge_config(args)
        _validate(args)
        return _COMMANDS[args.command](args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2


def _validate(args):
    if args.repeats < 1:
        raise ConfigError(f"--repeats must be >= 1, got {args.repeats}")
    if args.command in ("eval", "metrics") and not args.embedding:
        raise ConfigError(f"--embedding is required for {args.command}")


if __name__ == "__main__":
    sys.exit(main())

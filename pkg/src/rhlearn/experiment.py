"""Config-driven experiment runs producing JSON reports.

A run is described by an :class:`ExperimentConfig` (normally parsed from a
JSON file) and produces a report dict with keys ``config``, ``metrics``,
``timings_ms``, ``flags`` and ``version``.
"""
from __future__ import annotations

import csv
import dataclasses
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from . import __version__
from .dataset import (LabeledDataset, NoiseSpec, generate_blobs,
                      generate_union_of_subspaces, inject_salt_pepper,
                      load_dense_matrix, make_rng, save_dense_matrix)
from .learning import (PipelineError, Stages, classify, clustering_accuracy,
                       cluster_laplacian, knn_laplacian, label_matrix, nmi,
                       rh_laplacian, transduce)
from .regression import RegressionConfig

TASKS = ("cluster", "transduce", "noise_sweep", "synth")
METHODS = ("l1h", "l2h", "knn")
PRESETS = {
    "l1hsc": ("cluster", "l1h"),
    "l2hsc": ("cluster", "l2h"),
    "l1ht": ("transduce", "l1h"),
    "l2ht": ("transduce", "l2h"),
    "knnhsc": ("cluster", "knn"),
    "knnht": ("transduce", "knn"),
}
GENERATORS = {
    "blobs": (generate_blobs, ("k", "n_per", "d", "separation", "spread")),
    "subspaces": (generate_union_of_subspaces,
                  ("k", "sub_dim", "d", "n_per", "noise_sigma")),
}


class ConfigError(ValueError):
    """Invalid configuration or I/O problem (CLI exit code 2)."""


class ComputationError(RuntimeError):
    """Numerical failure during a run (CLI exit code 1)."""


@dataclass
class ExperimentConfig:
    task: str = "cluster"
    input: Optional[str] = None
    generator: Optional[dict] = None
    method: str = "l2h"
    preset: Optional[str] = None
    beta: float = 1e-3
    method_beta: dict = field(default_factory=dict)
    t: int = 5
    lam: float = 10.0
    k: Optional[int] = None
    seed: int = 0
    label_fraction: float = 0.5
    two_fold: bool = False
    noise_levels: list = field(default_factory=list)
    noise_low: Union[float, str] = 0.0
    noise_high: Union[float, str] = 255.0
    noise_seed: Optional[int] = None
    sweep_task: str = "cluster"
    sweep_methods: list = field(default_factory=lambda: list(METHODS))
    tol: float = 1e-7
    max_iter: int = 10000
    normalize_columns: bool = True
    raw_similarity: bool = False
    literal_eq3: bool = False
    skip_null_space: bool = False
    kmeans_restarts: int = 10
    strict: bool = False
    output: Optional[str] = None

    # JSON spells the transduction weight "lambda".
    _aliases = {"lambda": "lam"}

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        kwargs = {}
        for key, value in data.items():
            name = cls._aliases.get(key, key)
            if name not in names:
                raise ConfigError(f"unknown config key {key!r}")
            kwargs[name] = value
        cfg = cls(**kwargs)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["lambda"] = out.pop("lam")
        return out

    def validate(self) -> None:
        if self.preset is not None:
            if self.preset not in PRESETS:
                raise ConfigError(f"preset: unknown preset {self.preset!r}")
            self.task, self.method = PRESETS[self.preset]
        if self.task not in TASKS:
            raise ConfigError(f"task: must be one of {TASKS}, got {self.task!r}")
        if self.method not in METHODS:
            raise ConfigError(f"method: must be one of {METHODS}, got {self.method!r}")
        bad = [m for m in self.sweep_methods if m not in METHODS]
        if bad or not self.sweep_methods:
            raise ConfigError(f"sweep_methods: invalid entries {bad}")
        if self.sweep_task not in ("cluster", "transduce"):
            raise ConfigError("sweep_task: must be 'cluster' or 'transduce'")
        if (self.input is None) == (self.generator is None):
            if not (self.task == "synth" and self.generator is not None):
                raise ConfigError("exactly one of input / generator must be given")
        if self.task == "synth" and self.generator is None:
            raise ConfigError("generator: required for task synth")
        if self.generator is not None:
            kind = self.generator.get("kind")
            if kind not in GENERATORS:
                raise ConfigError(f"generator.kind: must be one of {tuple(GENERATORS)}")
            allowed = set(GENERATORS[kind][1]) | {"kind", "seed"}
            extra = set(self.generator) - allowed
            if extra:
                raise ConfigError(f"generator: unknown keys {sorted(extra)}")
        if not (isinstance(self.beta, (int, float)) and self.beta > 0):
            raise ConfigError("beta: must be > 0")
        for m, b in self.method_beta.items():
            if m not in ("l1h", "l2h") or not (isinstance(b, (int, float)) and b > 0):
                raise ConfigError(f"method_beta: invalid entry {m!r}: {b!r}")
        if not (isinstance(self.lam, (int, float)) and self.lam > 0):
            raise ConfigError("lambda: must be > 0")
        if not (isinstance(self.t, int) and self.t >= 2):
            raise ConfigError("t: must be an integer >= 2")
        if self.k is not None and not (isinstance(self.k, int) and self.k >= 1):
            raise ConfigError("k: must be a positive integer")
        if not (isinstance(self.seed, int) and self.seed >= 0):
            raise ConfigError("seed: must be an unsigned integer")
        if not 0 < self.label_fraction <= 1:
            raise ConfigError("label_fraction: must be in (0, 1]")
        if self.task == "noise_sweep" and not self.noise_levels:
            raise ConfigError("noise_levels: must be nonempty for noise_sweep")
        for lvl in self.noise_levels:
            if not 0 <= lvl <= 1:
                raise ConfigError(f"noise_levels: {lvl} not in [0, 1]")
        for name in ("noise_low", "noise_high"):
            v = getattr(self, name)
            if isinstance(v, str) and v not in ("min", "max"):
                raise ConfigError(f"{name}: must be a number, 'min' or 'max'")
        if not self.tol > 0 or self.max_iter < 1:
            raise ConfigError("tol / max_iter: must be positive")

    def regression_config(self, method: str) -> RegressionConfig:
        beta = self.method_beta.get(method, self.beta)
        return RegressionConfig(model="l1" if method == "l1h" else "l2", beta=beta,
                                tol=self.tol, max_iter=self.max_iter,
                                normalize_columns=self.normalize_columns)


def pipeline_name(task: str, method: str) -> str:
    base = {"l1h": "L1H", "l2h": "L2H", "knn": "kNN-H"}[method]
    return base + ("SC" if task == "cluster" else "T")


def load_dataset(cfg: ExperimentConfig) -> LabeledDataset:
    if cfg.generator is not None:
        kind = cfg.generator["kind"]
        fn, params = GENERATORS[kind]
        missing = [p for p in params if p not in cfg.generator]
        if missing:
            raise ConfigError(f"generator: missing keys {missing}")
        try:
            return fn(**{p: cfg.generator[p] for p in params},
                      seed=cfg.generator.get("seed", cfg.seed))
        except ValueError as exc:
            raise ConfigError(f"generator: {exc}") from None
    path = Path(cfg.input)
    if not path.exists():
        raise ConfigError(f"input file not found: {path}")
    try:
        return load_dense_matrix(path, has_labels=True)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


# --- single pipeline runs -----------------------------------------------------

@dataclass
class RunOptions:
    jobs: int = 1
    dump_dir: Optional[Path] = None


def _laplacian(X, method, cfg, st, jobs):
    if method == "knn":
        return knn_laplacian(X, cfg.t, stages=st)
    return rh_laplacian(X, cfg.regression_config(method), cfg.t,
                        literal_eq3=cfg.literal_eq3, raw_similarity=cfg.raw_similarity,
                        n_jobs=jobs, stages=st)


def _dump(st: Stages, directory: Optional[Path], prefix: str = ""):
    if directory is None:
        return
    directory.mkdir(parents=True, exist_ok=True)
    for name, arr in st.products.items():
        np.savetxt(directory / f"{prefix}{name}.csv", np.atleast_2d(arr), delimiter=",",
                   fmt="%.17g")


def _cluster(ds, X, method, cfg, opts, prefix=""):
    st = Stages()
    L = _laplacian(X, method, cfg, st, opts.jobs)
    k = cfg.k if cfg.k is not None else ds.n_classes
    res = cluster_laplacian(L, k, seed=cfg.seed, restarts=cfg.kmeans_restarts,
                            skip_null=cfg.skip_null_space, stages=st)
    _dump(st, opts.dump_dir, prefix)
    metrics = {
        "accuracy": clustering_accuracy(res.labels, ds.labels),
        "nmi": nmi(res.labels, ds.labels),
        "inertia": res.objective,
        "k": k,
    }
    return metrics, res.labels, st


def stratified_split(labels, fraction: float, seed: int) -> np.ndarray:
    """Boolean mask with ``max(1, round(fraction * n_c))`` labeled members per class."""
    labels = np.asarray(labels)
    rng = make_rng(seed)
    mask = np.zeros(labels.size, dtype=bool)
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        n_lab = min(idx.size, max(1, int(round(fraction * idx.size))))
        mask[rng.permutation(idx)[:n_lab]] = True
    return mask


def two_fold_masks(labels, seed: int):
    labels = np.asarray(labels)
    counts = np.bincount(labels)
    small = np.flatnonzero((counts > 0) & (counts < 2))
    if small.size:
        raise ConfigError(f"two-fold split needs >= 2 samples per class; class {int(small[0])} has fewer")
    first = stratified_split(labels, 0.5, seed)
    return [first, ~first]


def _transduce(ds, X, method, cfg, opts, prefix=""):
    st = Stages()
    L = _laplacian(X, method, cfg, st, opts.jobs)
    masks = (two_fold_masks(ds.labels, cfg.seed) if cfg.two_fold
             else [stratified_split(ds.labels, cfg.label_fraction, cfg.seed)])
    pred = np.full(ds.n_samples, -1, dtype=np.int64)
    errors = []
    n_test = 0
    for labeled in masks:
        Y = label_matrix(ds.labels, labeled, ds.n_classes)
        F = st.run("transduce", transduce, L, Y, cfg.lam)
        fold_pred = classify(F)
        test = ~labeled
        if len(masks) == 1:
            pred = fold_pred
        else:
            pred[test] = fold_pred[test]
        n_test += int(test.sum())
        if test.any():
            errors.append(float(np.mean(fold_pred[test] != ds.labels[test])))
    _dump(st, opts.dump_dir, prefix)
    err = float(np.mean(errors)) if errors else None
    metrics = {
        "error_rate": err,
        "accuracy": None if err is None else 1.0 - err,
        "n_test": n_test,
        "folds": len(masks),
    }
    if err is None:
        metrics["note"] = "no test vertices"
    return metrics, pred, st


def _flags(cfg, st):
    return {"converged": st.converged, "sigma_fallback": st.sigma_fallback,
            "literal_eq3": cfg.literal_eq3, "raw_similarity": cfg.raw_similarity,
            "skip_null_space": cfg.skip_null_space}


def _report(cfg, metrics, timings, flags):
    return {"config": cfg.to_dict(), "metrics": metrics, "timings_ms": timings,
            "flags": flags, "version": __version__}


def _check_strict(cfg, flags):
    if cfg.strict and not flags["converged"]:
        raise ComputationError("LASSO solver did not converge (strict mode)")


def run_cluster(cfg: ExperimentConfig, opts: Optional[RunOptions] = None) -> dict:
    opts = opts or RunOptions()
    ds = load_dataset(cfg)
    metrics, labels, st = _guard(_cluster, ds, ds.X, cfg.method, cfg, opts)
    metrics["pipeline"] = pipeline_name("cluster", cfg.method)
    flags = _flags(cfg, st)
    _check_strict(cfg, flags)
    rep = _report(cfg, metrics, st.timings_ms, flags)
    _write_outputs(cfg, rep, [("", labels, ds.labels)])
    return rep


def run_transduce(cfg: ExperimentConfig, opts: Optional[RunOptions] = None) -> dict:
    opts = opts or RunOptions()
    ds = load_dataset(cfg)
    metrics, labels, st = _guard(_transduce, ds, ds.X, cfg.method, cfg, opts)
    metrics["pipeline"] = pipeline_name("transduce", cfg.method)
    flags = _flags(cfg, st)
    flags["no_test_vertices"] = metrics["error_rate"] is None
    _check_strict(cfg, flags)
    rep = _report(cfg, metrics, st.timings_ms, flags)
    _write_outputs(cfg, rep, [("", labels, ds.labels)])
    return rep


def resolve_noise_value(v, X) -> float:
    if v == "min":
        return float(X.min())
    if v == "max":
        return float(X.max())
    return float(v)


def run_noise_sweep(cfg: ExperimentConfig, opts: Optional[RunOptions] = None) -> dict:
    """Corrupt the dataset at every level and run each sweep method on it.

    Rows of ``metrics["table"]`` are ordered by (level, method).
    """
    opts = opts or RunOptions()
    ds = load_dataset(cfg)
    low = resolve_noise_value(cfg.noise_low, ds.X)
    high = resolve_noise_value(cfg.noise_high, ds.X)
    noise_seed = cfg.seed if cfg.noise_seed is None else cfg.noise_seed
    runner = _cluster if cfg.sweep_task == "cluster" else _transduce
    points = [(lvl, m) for lvl in cfg.noise_levels for m in cfg.sweep_methods]
    noisy = {lvl: inject_salt_pepper(ds.X, NoiseSpec(lvl, low, high, noise_seed))
             for lvl in cfg.noise_levels}
    inner = RunOptions(jobs=1, dump_dir=opts.dump_dir)

    def one(point):
        lvl, method = point
        t0 = time.perf_counter()
        metrics, labels, st = _guard(runner, ds, noisy[lvl], method, cfg, inner,
                                     prefix=f"level{lvl}_{method}_")
        row = {"level": lvl, "method": method,
               "pipeline": pipeline_name(cfg.sweep_task, method), **metrics,
               "converged": st.converged}
        return row, labels, (time.perf_counter() - t0) * 1e3

    if opts.jobs > 1:
        with ThreadPoolExecutor(max_workers=opts.jobs) as pool:
            results = list(pool.map(one, points))
    else:
        results = [one(p) for p in points]
    table = [r for r, _, _ in results]
    timings = {f"level{r['level']}_{r['method']}": ms for r, _, ms in results}
    flags = {"converged": all(r["converged"] for r in table),
             "literal_eq3": cfg.literal_eq3, "raw_similarity": cfg.raw_similarity,
             "skip_null_space": cfg.skip_null_space,
             "noise_low": low, "noise_high": high, "noise_seed": noise_seed}
    _check_strict(cfg, flags)
    rep = _report(cfg, {"table": table, "task": cfg.sweep_task}, timings, flags)
    _write_outputs(cfg, rep, [(f"{r['level']},{r['method']}", lab, ds.labels)
                              for r, lab, _ in results])
    return rep


def run_synth(cfg: ExperimentConfig, opts: Optional[RunOptions] = None) -> dict:
    ds = load_dataset(cfg)
    if cfg.output:
        save_dense_matrix(cfg.output, ds.X, ds.labels)
    return {"config": cfg.to_dict(),
            "metrics": {"n_samples": ds.n_samples, "dim": ds.dim, "n_classes": ds.n_classes},
            "timings_ms": {}, "flags": {}, "version": __version__}


RUNNERS = {"cluster": run_cluster, "transduce": run_transduce,
           "noise_sweep": run_noise_sweep, "synth": run_synth}


def run(cfg: ExperimentConfig, opts: Optional[RunOptions] = None) -> dict:
    return RUNNERS[cfg.task](cfg, opts)


def _guard(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except PipelineError as exc:
        raise ComputationError(str(exc)) from exc


def labels_path(report_path) -> Path:
    p = Path(report_path)
    return p.with_name(p.stem + ".labels.csv")


def _write_outputs(cfg, report, label_sets):
    if not cfg.output:
        return
    out = Path(cfg.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    with labels_path(out).open("w", newline="") as fh:
        writer = csv.writer(fh)
        sweep = bool(label_sets and label_sets[0][0])
        writer.writerow((["level", "method"] if sweep else []) + ["index", "predicted", "truth"])
        for key, pred, truth in label_sets:
            prefix = key.split(",") if sweep else []
            for i, (p, t) in enumerate(zip(pred, truth)):
                writer.writerow(prefix + [i, int(p), int(t)])

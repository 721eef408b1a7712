"""Experiment orchestration.

One experiment = generate a sequence, split it chronologically (final 10%
as test), fit every requested method on the training segment only, then
predict each test graph from the k graphs preceding it and record the
edit distance between prediction and truth. All methods are scored on
exactly the same (window, target) pairs.

Emitted report files are byte-stable across runs with the same seed; wall
-clock timings go to a separate sidecar file so they never break that.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import baselines
from .baselines import binarize_adjacency
from .dataset import generator_config_from_dict, generator_config_to_dict
from .distance import DistanceParams, ged
from .generators import GeneratorConfig, RotationalConfig, generate_sequence
from .graphs import AttributedGraph, GraphSequence
from .neural import (
    NgarConfig,
    NgarModel,
    forward_batch,
    loss_terms,
    train,
)
from .neural.layers import normalize_adjacency

METHODS = ("mean", "mart", "move", "var", "ngar")


@dataclass(frozen=True)
class ExperimentConfig:
    generator: GeneratorConfig
    name: str = "experiment"
    total_steps: int = 20_000
    test_fraction: float = 0.1
    window: int = 20
    methods: Sequence[str] = METHODS
    distance: DistanceParams = DistanceParams()
    ngar: NgarConfig = NgarConfig()
    var_ridge: float = 1e-6
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.total_steps <= 10 * self.window:
            raise ValueError("total_steps must exceed 10 * window")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods: {sorted(unknown)}")
        object.__setattr__(self, "methods", tuple(self.methods))
        # the model window always follows the experiment window
        if self.ngar.window != self.window:
            object.__setattr__(self, "ngar", replace(self.ngar, window=self.window))

    @property
    def complexity_key(self) -> str:
        """Complexity label for sweep tables: the process order p or the
        latent dimension c."""
        if isinstance(self.generator, RotationalConfig):
            return f"p={self.generator.order}"
        if self.generator is None:
            return "unknown"
        return f"c={self.generator.complexity}"


@dataclass
class MethodResult:
    residuals: List[float]
    fit_seconds: float
    predict_seconds: float

    def summary(self) -> Dict[str, float]:
        r = np.asarray(self.residuals, dtype=np.float64)
        if r.size == 0:
            return {"count": 0}
        q1, med, q3 = np.percentile(r, [25, 50, 75])
        return {
            "count": int(r.size),
            "median": float(med),
            "q1": float(q1),
            "q3": float(q3),
            "mean": float(r.mean()),
        }


@dataclass
class ExperimentReport:
    name: str
    complexity_key: str
    config_echo: dict
    n_test: int
    results: Dict[str, MethodResult]
    ngar_metrics: Optional[Dict[str, float]] = None
    training: Optional[Dict[str, float]] = None

    def timings(self) -> Dict[str, Dict[str, float]]:
        return {
            m: {"fit_seconds": r.fit_seconds, "predict_seconds": r.predict_seconds}
            for m, r in self.results.items()
        }


@dataclass
class FittedMethods:
    """Everything derived from the training segment."""

    mean_graph: Optional[object] = None
    var_model: Optional[baselines.VarModel] = None
    ngar_model: Optional[NgarModel] = None
    ngar_history: Optional[object] = None
    fit_seconds: Dict[str, float] = field(default_factory=dict)


def fit_methods(
    train_seq: GraphSequence, config: ExperimentConfig, on_epoch=None
) -> FittedMethods:
    """Fit all requested methods with access to the training segment only."""
    fitted = FittedMethods()
    try:
        if "mean" in config.methods:
            method = "mean"
            t0 = time.perf_counter()
            fitted.mean_graph = baselines.predict_mean(train_seq)
            fitted.fit_seconds["mean"] = time.perf_counter() - t0
        if "mart" in config.methods:
            fitted.fit_seconds["mart"] = 0.0
        if "move" in config.methods:
            fitted.fit_seconds["move"] = 0.0
        if "var" in config.methods:
            method = "var"
            t0 = time.perf_counter()
            fitted.var_model = baselines.var_fit(
                train_seq, config.window, config.var_ridge
            )
            fitted.fit_seconds["var"] = time.perf_counter() - t0
        if "ngar" in config.methods:
            method = "ngar"
            t0 = time.perf_counter()
            model = NgarModel.initialize(
                train_seq.n_nodes, train_seq.feature_dim, config.ngar
            )
            fitted.ngar_history = train(model, train_seq, config.ngar, on_epoch=on_epoch)
            fitted.ngar_model = model
            fitted.fit_seconds["ngar"] = time.perf_counter() - t0
    except Exception as exc:
        raise RuntimeError(f"fitting method {method!r} failed: {exc}") from exc
    return fitted


def adjacency_accuracy(
    probs: np.ndarray, targets: np.ndarray, threshold: float = 0.5
) -> float:
    """Fraction of adjacency entries predicted correctly after pair-mean
    symmetrization and thresholding (ties resolve to absent)."""
    sym = (probs + probs.swapaxes(-1, -2)) / 2.0
    predicted = (sym > threshold).astype(np.int8)
    eye = np.eye(predicted.shape[-1], dtype=bool)
    predicted[..., eye] = 0
    return float((predicted == np.asarray(targets, dtype=np.int8)).mean())


def _ngar_test_outputs(model: NgarModel, seq: GraphSequence, targets: np.ndarray):
    """Batched forward over all test windows; returns probabilities and
    feature predictions per target."""
    dtype = model.dtype
    k = model.config.window
    x_all = seq.features_array().astype(dtype)
    a_norm_all = normalize_adjacency(seq.adjacency_array(), dtype=dtype)
    offsets = np.arange(-k, 0)
    probs, feats = [], []
    batch = model.config.batch_size
    for start in range(0, len(targets), batch):
        idx = targets[start : start + batch]
        win = (idx[:, None] + offsets).T  # time-major
        a_prob, x_hat, _ = forward_batch(model, x_all[win], a_norm_all[win])
        probs.append(np.asarray(a_prob, dtype=np.float64))
        feats.append(np.asarray(x_hat, dtype=np.float64))
    return np.concatenate(probs), np.concatenate(feats)


def evaluate_methods(
    seq: GraphSequence,
    fitted: FittedMethods,
    config: ExperimentConfig,
    test_targets: np.ndarray,
) -> ExperimentReport:
    """Score every fitted method on the same test targets."""
    k = config.window
    results: Dict[str, MethodResult] = {}
    ngar_metrics = None

    ngar_outputs = None
    if "ngar" in config.methods:
        ngar_outputs = _ngar_test_outputs(fitted.ngar_model, seq, test_targets)

    for method in config.methods:
        t0 = time.perf_counter()
        residuals = []
        for pos, t in enumerate(test_targets):
            try:
                window = seq[t - k : t]
                if method == "mean":
                    pred = fitted.mean_graph
                elif method == "mart":
                    pred = baselines.predict_mart(window)
                elif method == "move":
                    pred = baselines.predict_move(window, k)
                elif method == "var":
                    pred = baselines.var_predict(fitted.var_model, window)
                else:
                    a_prob = ngar_outputs[0][pos]
                    x_hat = ngar_outputs[1][pos]
                    adjacency = binarize_adjacency(
                        a_prob, directed=False, threshold=config.ngar.adjacency_threshold
                    )
                    pred = AttributedGraph(x_hat, adjacency)
                residuals.append(ged(seq[t], pred, config.distance))
            except Exception as exc:
                raise RuntimeError(
                    f"method {method!r} failed at timestep {t}: {exc}"
                ) from exc
        results[method] = MethodResult(
            residuals=residuals,
            fit_seconds=fitted.fit_seconds.get(method, 0.0),
            predict_seconds=time.perf_counter() - t0,
        )

    if ngar_outputs is not None:
        a_prob_all, x_hat_all = ngar_outputs
        a_target = seq.adjacency_array()[test_targets].astype(np.float64)
        x_target = seq.features_array()[test_targets]
        mse, bce = loss_terms(a_prob_all, x_hat_all, a_target, x_target)
        l2 = config.ngar.l2_weight * fitted.ngar_model.l2_penalty()
        accuracy = adjacency_accuracy(
            a_prob_all, a_target, config.ngar.adjacency_threshold
        )
        ngar_metrics = {
            "loss": mse + bce + l2,
            "feature_mse": mse,
            "adjacency_log_loss": bce,
            "adjacency_accuracy": accuracy,
        }

    training = None
    if fitted.ngar_history is not None:
        training = {
            "epochs": fitted.ngar_history.epochs,
            "best_epoch": fitted.ngar_history.best_epoch,
            "best_val_loss": fitted.ngar_history.best_val_loss,
        }

    echo = experiment_config_to_dict(config)
    return ExperimentReport(
        name=config.name,
        complexity_key=config.complexity_key,
        config_echo=echo,
        n_test=len(test_targets),
        results=results,
        ngar_metrics=ngar_metrics,
        training=training,
    )


def split_targets(config: ExperimentConfig) -> np.ndarray:
    """Global indices of the test targets: the final test fraction of the
    sequence, restricted to indices with a full window of history."""
    n_test = int(config.total_steps * config.test_fraction)
    first = max(config.total_steps - n_test, config.window)
    return np.arange(first, config.total_steps)


def run_experiment(config: ExperimentConfig, on_epoch=None) -> ExperimentReport:
    seq = generate_sequence(config.generator, config.total_steps)
    test_targets = split_targets(config)
    train_seq = seq[: config.total_steps - len(test_targets)]
    fitted = fit_methods(train_seq, config, on_epoch=on_epoch)
    return evaluate_methods(seq, fitted, config, test_targets)


# ---------------------------------------------------------------------------
# config (de)serialization

def experiment_config_to_dict(config: ExperimentConfig) -> dict:
    return {
        "name": config.name,
        "generator": generator_config_to_dict(config.generator),
        "total_steps": config.total_steps,
        "test_fraction": config.test_fraction,
        "window": config.window,
        "methods": list(config.methods),
        "distance": {
            "edge_weight": config.distance.edge_weight,
            "correspondence": config.distance.correspondence.value,
            "permutation_cap": config.distance.permutation_cap,
        },
        "ngar": {
            "window": config.ngar.window,
            "conv_channels": config.ngar.conv_channels,
            "pool_channels": config.ngar.pool_channels,
            "rnn_units": config.ngar.rnn_units,
            "dense_units": list(config.ngar.dense_units),
            "l2_weight": config.ngar.l2_weight,
            "learning_rate": config.ngar.learning_rate,
            "batch_size": config.ngar.batch_size,
            "patience": config.ngar.patience,
            "max_epochs": config.ngar.max_epochs,
            "adjacency_threshold": config.ngar.adjacency_threshold,
            "seed": config.ngar.seed,
            "dtype": config.ngar.dtype,
        },
        "var_ridge": config.var_ridge,
        "seed": config.seed,
    }


def experiment_config_from_dict(data: dict) -> ExperimentConfig:
    generator = generator_config_from_dict(data["generator"])
    kwargs = {}
    if "distance" in data:
        kwargs["distance"] = DistanceParams(**data["distance"])
    if "ngar" in data:
        ngar = dict(data["ngar"])
        if "dense_units" in ngar:
            ngar["dense_units"] = tuple(ngar["dense_units"])
        kwargs["ngar"] = NgarConfig(**ngar)
    for key in ("name", "total_steps", "test_fraction", "window", "methods", "var_ridge", "seed"):
        if key in data:
            kwargs[key] = data[key]
    return ExperimentConfig(generator=generator, **kwargs)


# ---------------------------------------------------------------------------
# report emission

def _float_repr(value) -> str:
    return repr(float(value))


def report_payload(report: ExperimentReport) -> dict:
    """Deterministic JSON payload (no timings)."""
    return {
        "name": report.name,
        "complexity": report.complexity_key,
        "n_test": report.n_test,
        "config": report.config_echo,
        "summaries": {m: r.summary() for m, r in report.results.items()},
        "ngar_metrics": report.ngar_metrics,
        "training": report.training,
        "residuals": {m: r.residuals for m, r in report.results.items()},
    }


def emit_report(report: ExperimentReport, out_dir, formats=("json", "csv")) -> List[Path]:
    """Write report files; returns the paths written.

    report.json and the CSV tables depend only on the report contents, so
    re-emission (and re-running with the same seed) is byte-identical;
    wall-clock timings are written separately to timings.json.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if "json" in formats:
        path = out_dir / "report.json"
        path.write_text(json.dumps(report_payload(report), indent=2) + "\n")
        written.append(path)
    if "csv" in formats:
        metrics = out_dir / "metrics.csv"
        lines = ["method,count,median,q1,q3,mean,loss,feature_mse,adjacency_log_loss,adjacency_accuracy"]
        for method, result in report.results.items():
            s = result.summary()
            row = [method, str(s.get("count", 0))]
            for key in ("median", "q1", "q3", "mean"):
                row.append(_float_repr(s[key]) if key in s else "")
            if method == "ngar" and report.ngar_metrics:
                nm = report.ngar_metrics
                row += [
                    _float_repr(nm["loss"]),
                    _float_repr(nm["feature_mse"]),
                    _float_repr(nm["adjacency_log_loss"]),
                    _float_repr(nm["adjacency_accuracy"]),
                ]
            else:
                row += ["", "", "", ""]
            lines.append(",".join(row))
        metrics.write_text("\n".join(lines) + "\n")
        written.append(metrics)

        residuals = out_dir / "residuals.csv"
        lines = ["method,index,ged"]
        for method, result in report.results.items():
            for i, value in enumerate(result.residuals):
                lines.append(f"{method},{i},{_float_repr(value)}")
        residuals.write_text("\n".join(lines) + "\n")
        written.append(residuals)

    timings = out_dir / "timings.json"
    timings.write_text(json.dumps(report.timings(), indent=2) + "\n")
    return written


# ---------------------------------------------------------------------------
# sweeps

@dataclass
class SweepResult:
    reports: List[ExperimentReport]
    errors: Dict[str, str]


def sweep(configs: Sequence[ExperimentConfig], out_dir=None) -> SweepResult:
    """Run experiments independently; failures are isolated per config.

    With out_dir set, each experiment's reports land in a subdirectory
    named after the config and a combined summary.csv keyed by complexity
    is written at the top level.
    """
    if len(configs) == 0:
        raise ValueError("sweep requires at least one config")
    reports: List[ExperimentReport] = []
    errors: Dict[str, str] = {}
    for config in configs:
        try:
            report = run_experiment(config)
            reports.append(report)
            if out_dir is not None:
                emit_report(report, Path(out_dir) / config.name)
        except Exception as exc:  # noqa: BLE001 - isolate per-config failures
            errors[config.name] = f"{type(exc).__name__}: {exc}"
    if out_dir is not None:
        _write_sweep_summary(reports, errors, Path(out_dir))
    return SweepResult(reports=reports, errors=errors)


def _write_sweep_summary(reports, errors, out_dir: Path):
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["name,complexity,method,count,median,q1,q3,mean,loss,feature_mse,adjacency_log_loss,adjacency_accuracy"]
    for report in reports:
        for method, result in report.results.items():
            s = result.summary()
            row = [report.name, report.complexity_key, method, str(s.get("count", 0))]
            for key in ("median", "q1", "q3", "mean"):
                row.append(_float_repr(s[key]) if key in s else "")
            if method == "ngar" and report.ngar_metrics:
                nm = report.ngar_metrics
                row += [
                    _float_repr(nm["loss"]),
                    _float_repr(nm["feature_mse"]),
                    _float_repr(nm["adjacency_log_loss"]),
                    _float_repr(nm["adjacency_accuracy"]),
                ]
            else:
                row += ["", "", "", ""]
            lines.append(",".join(row))
    (out_dir / "summary.csv").write_text("\n".join(lines) + "\n")
    if errors:
        (out_dir / "errors.json").write_text(json.dumps(errors, indent=2) + "\n")

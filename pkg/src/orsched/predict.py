"""Prediction pipeline around the regressors: feature encoding, stratified
splitting, regression metrics, cross-validated grid search, APE-based
confidence levels, historical-mean baselines, and the model artifact format.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from orsched.core import ConfidenceLevel
from orsched.ingest import CleanDataset, SurgicalRecord
from orsched.regressors import FittedModel, ModelSpec, fit, predict  # noqa: F401  (re-exported)

#: Columns never used as features: identifiers plus every intra-operative
#: timestamp (the duration is exactly exit minus entry, so these leak the
#: target into training).
EXCLUDED_FEATURE_COLUMNS = frozenset(
    {
        "PROGRESSIVO",
        "NOSOLOGICO",
        "INGRESSOSALA",
        "USCITASALA",
        "INGRESSOBLOCCOOP",
        "USCITABLOCCOOP",
        "PREPARAZIONEPAZIENTE",
        "INIZIOANESTESIA",
        "INIZIOINTERVENTO",
        "FINEINTERVENTO",
        "FINEASSANESTINSALA",
    }
)

UNSEEN_CATEGORY = -1


class PredictError(Exception):
    pass


@dataclass
class FeatureEncoder:
    """Deterministic mapping from raw records to a numeric feature matrix.

    Categorical columns get ordinal codes by first appearance in the training
    data (unseen values map to a reserved code); timestamp columns decompose
    into hour and weekday.
    """

    numeric_columns: list[str] = field(default_factory=list)
    timestamp_columns: list[str] = field(default_factory=list)
    categorical_columns: list[str] = field(default_factory=list)
    categories: dict[str, dict[str, int]] = field(default_factory=dict)

    @property
    def feature_names(self) -> list[str]:
        names = list(self.numeric_columns)
        for col in self.timestamp_columns:
            names += [f"{col}__hour", f"{col}__weekday"]
        names += list(self.categorical_columns)
        return names

    def transform(self, records: Sequence[SurgicalRecord]) -> np.ndarray:
        rows = np.zeros((len(records), len(self.feature_names)), dtype=float)
        j = 0
        for col in self.numeric_columns:
            for i, rec in enumerate(records):
                v = rec.get(col)
                rows[i, j] = float(v) if isinstance(v, (int, float)) else 0.0
            j += 1
        for col in self.timestamp_columns:
            for i, rec in enumerate(records):
                v = rec.get(col)
                if isinstance(v, datetime):
                    rows[i, j] = v.hour
                    rows[i, j + 1] = v.weekday()
            j += 2
        for col in self.categorical_columns:
            table = self.categories[col]
            for i, rec in enumerate(records):
                rows[i, j] = table.get(_category_key(rec.get(col)), UNSEEN_CATEGORY)
            j += 1
        return rows

    def to_json_dict(self) -> dict:
        return {
            "numeric_columns": self.numeric_columns,
            "timestamp_columns": self.timestamp_columns,
            "categorical_columns": self.categorical_columns,
            "categories": self.categories,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "FeatureEncoder":
        return cls(
            numeric_columns=list(data["numeric_columns"]),
            timestamp_columns=list(data["timestamp_columns"]),
            categorical_columns=list(data["categorical_columns"]),
            categories={c: dict(t) for c, t in data["categories"].items()},
        )


def _category_key(value: Any) -> str:
    return "" if value is None else str(value)


def encode_features(
    dataset: CleanDataset, target_name: str = "DURATA"
) -> tuple[np.ndarray, np.ndarray, FeatureEncoder]:
    """Encode a clean dataset into (features, target, fitted encoder).

    Identifier and leakage columns are excluded; remaining columns are typed
    by inspection of their first populated value.
    """
    if target_name not in dataset.kept_features:
        raise PredictError(f"target column {target_name!r} missing from dataset")
    y = np.array([float(rec[target_name]) for rec in dataset.records])
    if len(y) == 0:
        raise PredictError("empty dataset")
    if (y <= 0).any():
        raise PredictError("target must be positive minutes")

    encoder = FeatureEncoder()
    for col in dataset.kept_features:
        if col == target_name or col in EXCLUDED_FEATURE_COLUMNS:
            continue
        sample = next((rec[col] for rec in dataset.records if rec.get(col) is not None), None)
        if isinstance(sample, datetime):
            encoder.timestamp_columns.append(col)
        elif isinstance(sample, (int, float)) and not isinstance(sample, bool):
            encoder.numeric_columns.append(col)
        else:
            encoder.categorical_columns.append(col)

    for col in encoder.categorical_columns:
        table: dict[str, int] = {}
        for rec in dataset.records:
            table.setdefault(_category_key(rec.get(col)), len(table))
        encoder.categories[col] = table

    return encoder.transform(dataset.records), y, encoder


# ---------------------------------------------------------------------------
# splitting and metrics


def stratified_split(
    X: np.ndarray,
    y: np.ndarray,
    test_fraction: float = 0.2,
    n_bins: int = 10,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """Split indices preserving the target distribution.

    Targets are bucketed into quantile bins; each bin contributes its rounded
    share to the test set. Bins with fewer than two samples stay in train.
    """
    n = len(y)
    if not 1 <= n_bins <= n:
        raise PredictError(f"need 1 <= n_bins <= n, got n_bins={n_bins}, n={n}")
    edges = np.quantile(y, np.linspace(0, 1, n_bins + 1))[1:-1]
    bins = np.searchsorted(edges, y, side="right")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for b in np.unique(bins):
        members = np.flatnonzero(bins == b)
        rng.shuffle(members)
        n_test = int(round(test_fraction * len(members))) if len(members) >= 2 else 0
        test.extend(members[:n_test])
        train.extend(members[n_test:])
    return np.array(sorted(train)), np.array(sorted(test))


@dataclass(frozen=True)
class MetricsReport:
    """Mean absolute error, root mean squared error, and the coefficient of
    determination (None when the target is constant)."""

    mae: float
    rmse: float
    r2: float | None

    def to_json_dict(self) -> dict:
        return {"mae": self.mae, "rmse": self.rmse, "r2": self.r2}


def regression_metrics(y: Sequence[float], yhat: Sequence[float]) -> MetricsReport:
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.shape != yhat.shape or len(y) == 0:
        raise PredictError(f"need equal nonzero lengths, got {y.shape} and {yhat.shape}")
    err = y - yhat
    mae = float(np.abs(err).mean())
    rmse = float(np.sqrt((err**2).mean()))
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = None if ss_tot == 0 else 1.0 - float((err**2).sum()) / ss_tot
    return MetricsReport(mae=mae, rmse=rmse, r2=r2)


# ---------------------------------------------------------------------------
# grid search


@dataclass(frozen=True)
class CvResult:
    spec: ModelSpec
    mean_mae: float
    mean_rmse: float
    fold_mae: tuple[float, ...]
    fold_rmse: tuple[float, ...]


def grid_search_cv(
    grid: Sequence[ModelSpec],
    X: np.ndarray,
    y: np.ndarray,
    k_folds: int = 5,
    seed: int = 0,
) -> tuple[ModelSpec, list[CvResult]]:
    """Evaluate every spec on one shared seeded k-fold partition.

    Best spec: lowest mean fold MAE, ties broken by lower mean RMSE, then by
    grid order.
    """
    if not grid:
        raise PredictError("empty grid")
    if k_folds < 2:
        raise PredictError("k_folds must be >= 2")
    n = len(y)
    if n < k_folds:
        raise PredictError(f"need at least k_folds={k_folds} samples, got {n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    folds = np.array_split(perm, k_folds)
    fit_seeds = [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(k_folds)]

    results: list[CvResult] = []
    for spec in grid:
        maes, rmses = [], []
        for fold_idx, fold in enumerate(folds):
            mask = np.ones(n, dtype=bool)
            mask[fold] = False
            model = fit(spec, X[mask], y[mask], seed=fit_seeds[fold_idx])
            report = regression_metrics(y[fold], predict(model, X[fold]))
            maes.append(report.mae)
            rmses.append(report.rmse)
        results.append(
            CvResult(spec, float(np.mean(maes)), float(np.mean(rmses)), tuple(maes), tuple(rmses))
        )
    best_idx = min(range(len(grid)), key=lambda i: (results[i].mean_mae, results[i].mean_rmse, i))
    return grid[best_idx], results


# ---------------------------------------------------------------------------
# confidence levels


def ape(y_true: float, y_pred: float) -> float:
    """Absolute percentage error of one prediction."""
    if y_true <= 0:
        raise PredictError(f"APE needs a positive actual value, got {y_true}")
    return abs(y_pred - y_true) / y_true * 100.0


def confidence_level(ape_percent: float) -> ConfidenceLevel:
    """Bucket a percentage error: <10 High, [10,25) Moderate, [25,50) Low,
    >=50 Very Low."""
    if ape_percent < 10.0:
        return ConfidenceLevel(1)
    if ape_percent < 25.0:
        return ConfidenceLevel(2)
    if ape_percent < 50.0:
        return ConfidenceLevel(3)
    return ConfidenceLevel(4)


# ---------------------------------------------------------------------------
# historical-mean baselines

_BASELINE_COLUMNS = {"department": "REPARTO", "procedure_type": "ICD1"}


@dataclass(frozen=True)
class BaselineEstimator:
    """Mean historical duration per key value, with a global-mean fallback."""

    key: str
    column: str
    means: Mapping[str, float]
    global_mean: float

    def estimate(self, key_value: Any) -> float:
        return self.means.get(_category_key(key_value), self.global_mean)

    def estimate_record(self, record: SurgicalRecord) -> float:
        return self.estimate(record.get(self.column))

    def to_json_dict(self) -> dict:
        return {"key": self.key, "column": self.column, "means": dict(self.means), "global_mean": self.global_mean}

    @classmethod
    def from_json_dict(cls, data: dict) -> "BaselineEstimator":
        return cls(data["key"], data["column"], dict(data["means"]), data["global_mean"])


def baseline_mean_estimator(records: Sequence[SurgicalRecord], key: str) -> BaselineEstimator:
    if key not in _BASELINE_COLUMNS:
        raise PredictError(f"key must be one of {sorted(_BASELINE_COLUMNS)}, got {key!r}")
    column = _BASELINE_COLUMNS[key]
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    total = 0.0
    for rec in records:
        value = _category_key(rec.get(column))
        duration = float(rec["DURATA"])
        sums[value] = sums.get(value, 0.0) + duration
        counts[value] = counts.get(value, 0) + 1
        total += duration
    if not records:
        raise PredictError("baseline needs at least one record")
    means = {v: sums[v] / counts[v] for v in sums}
    return BaselineEstimator(key, column, means, total / len(records))


# ---------------------------------------------------------------------------
# model artifact and prediction files

ARTIFACT_VERSION = 1


def save_model(
    model: FittedModel,
    encoder: FeatureEncoder,
    path: str | Path,
    baselines: Iterable[BaselineEstimator] = (),
) -> None:
    payload = {
        "format_version": ARTIFACT_VERSION,
        "family": model.family,
        "hyperparameters": model.hyperparameters,
        "structure": model.structure,
        "encoder": encoder.to_json_dict(),
        "baselines": {b.key: b.to_json_dict() for b in baselines},
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_model(path: str | Path) -> tuple[FittedModel, FeatureEncoder, dict[str, BaselineEstimator]]:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if data.get("format_version") != ARTIFACT_VERSION:
        raise PredictError(f"unsupported artifact version {data.get('format_version')!r}")
    model = FittedModel(data["family"], data["hyperparameters"], data["structure"])
    encoder = FeatureEncoder.from_json_dict(data["encoder"])
    baselines = {k: BaselineEstimator.from_json_dict(v) for k, v in data.get("baselines", {}).items()}
    return model, encoder, baselines


def write_predictions_csv(
    ids: Sequence[str],
    y: Sequence[float],
    yhat: Sequence[float],
    path: str | Path,
) -> None:
    """Per-sample prediction file: id, actual, predicted, APE, confidence."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id", "y", "yhat", "ape", "confidence"])
        for rid, actual, pred in zip(ids, y, yhat):
            err = ape(float(actual), float(pred))
            writer.writerow([rid, actual, f"{pred:.3f}", f"{err:.3f}", confidence_level(err).level])

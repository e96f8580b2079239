#!/usr/bin/env python3
"""Benchmark the four duration-regressor families on one synthetic dataset.

Each family runs with its reference hyperparameter configuration on an
identical preprocessing pipeline and stratified 80/20 split, next to the two
historical-mean baselines. Prints held-out MAE / RMSE / R^2 per model.

Example:
    python scripts/compare_models.py --rows 5000 --seed 0
"""

import argparse
import time

from orsched.ingest import PreprocessConfig, SyntheticConfig, generate_synthetic_dataset, preprocess
from orsched.predict import (
    ModelSpec,
    baseline_mean_estimator,
    encode_features,
    fit,
    predict,
    regression_metrics,
    stratified_split,
)

CONFIGS = [
    ModelSpec("tree", {"max_depth": 50, "min_samples_split": 2, "criterion": "friedman_mse"}),
    ModelSpec("forest", {"n_estimators": 10, "max_depth": None, "min_samples_split": 5}),
    ModelSpec("boosted_trees", {"n_estimators": 400, "learning_rate": 0.1, "max_depth": 5}),
    ModelSpec("knn", {"n_neighbors": 5, "weights": "distance"}),
]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--rows", type=int, default=5000)
    parser.add_argument("--noise", type=float, default=0.25)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    records = generate_synthetic_dataset(SyntheticConfig(n_rows=args.rows, noise=args.noise), seed=args.seed)
    clean, log = preprocess(records, PreprocessConfig(seed=args.seed))
    X, y, _ = encode_features(clean)
    train, test = stratified_split(X, y, test_fraction=0.2, n_bins=10, seed=args.seed)
    print(
        f"{len(clean.records)} rows after preprocessing "
        f"({log.stages[-1].features_out} features kept), train {len(train)} / test {len(test)}\n"
    )

    print(f"{'model':<16}{'MAE (min)':>10}{'RMSE (min)':>12}{'R2':>8}{'fit (s)':>9}")
    for spec in CONFIGS:
        start = time.monotonic()
        model = fit(spec, X[train], y[train], seed=args.seed)
        elapsed = time.monotonic() - start
        report = regression_metrics(y[test], predict(model, X[test]))
        print(f"{spec.family:<16}{report.mae:>10.2f}{report.rmse:>12.2f}{report.r2:>8.2f}{elapsed:>9.1f}")

    train_records = [clean.records[i] for i in train]
    test_records = [clean.records[i] for i in test]
    for key, label in (("department", "dept mean"), ("procedure_type", "procedure mean")):
        est = baseline_mean_estimator(train_records, key)
        report = regression_metrics(y[test], [est.estimate_record(r) for r in test_records])
        print(f"{label:<16}{report.mae:>10.2f}{report.rmse:>12.2f}{report.r2:>8.2f}{'-':>9}")


if __name__ == "__main__":
    main()

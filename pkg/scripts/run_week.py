#!/usr/bin/env python3
"""Compare all five scheduling methods on one synthetic hospital week.

Synthesizes a historical dataset and an operating week, trains the boosted
duration model, then schedules the week with VBA / Conf / Pred / Dep / Surg
under identical solver limits and replays each schedule against the actual
durations. Prints the per-method occupancy table.

Example:
    python scripts/run_week.py --seed 7 --hospital bordighera --time-limit 10
"""

import argparse

from orsched.evaluate import DurationEstimates, format_report_table, run_method_comparison
from orsched.ingest import (
    HOSPITAL_SHAPES,
    PreprocessConfig,
    SyntheticConfig,
    build_instance,
    generate_synthetic_dataset,
    generate_week,
    preprocess,
)
from orsched.predict import ModelSpec, baseline_mean_estimator, encode_features, fit, predict
from orsched.solve import SolveLimits


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--hospital", choices=sorted(HOSPITAL_SHAPES), default="bordighera")
    parser.add_argument("--rows", type=int, default=1500, help="historical training rows")
    parser.add_argument("--noise", type=float, default=0.25)
    parser.add_argument("--fill-ratio", type=float, default=0.95)
    parser.add_argument("--time-limit", type=float, default=10.0, help="seconds per solve")
    parser.add_argument("--restarts", type=int, default=8)
    args = parser.parse_args()

    config = SyntheticConfig(n_rows=args.rows, noise=args.noise, world_seed=args.seed)
    records = generate_synthetic_dataset(config, seed=args.seed * 7 + 1)
    clean, _ = preprocess(records, PreprocessConfig(seed=args.seed))
    X, y, encoder = encode_features(clean)
    model = fit(
        ModelSpec("boosted_trees", {"n_estimators": 200, "learning_rate": 0.1, "max_depth": 4}),
        X,
        y,
        seed=args.seed,
    )
    dep = baseline_mean_estimator(clean.records, "department")
    surg = baseline_mean_estimator(clean.records, "procedure_type")

    week, registrations, mss, shifts = generate_week(
        config, seed=args.seed, shape=HOSPITAL_SHAPES[args.hospital], fill_ratio=args.fill_ratio
    )
    instance = build_instance(registrations, mss, shifts)
    yhat = predict(model, encoder.transform(week))
    estimates = DurationEstimates(
        predicted={r.id: float(p) for r, p in zip(registrations, yhat)},
        department_mean={r.id: dep.estimate_record(rec) for r, rec in zip(registrations, week)},
        procedure_mean={r.id: surg.estimate_record(rec) for r, rec in zip(registrations, week)},
    )

    limits = SolveLimits(time_budget_s=args.time_limit, max_restarts=args.restarts, seed=args.seed)
    reports = run_method_comparison(instance, estimates, limits=limits, solver="heuristic")
    print(
        f"{args.hospital}: {len(registrations)} registrations, "
        f"{len(mss)} cells x {shifts[0].capacity_min} min\n"
    )
    print(format_report_table({args.hospital: reports}))


if __name__ == "__main__":
    main()

"""Schedule quality evaluation: replay a schedule against the actual surgery
durations, compute per-cell occupancy and booking counts, and compare the
scheduling methods (VBA, Conf, Pred, Dep, Surg) on one instance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from orsched.core import ConfidenceLevel, ProblemInstance, Registration, Schedule
from orsched.predict import ape, confidence_level
from orsched.solve import CellKey, SolveLimits, solve_auto

METHODS = ("VBA", "Conf", "Pred", "Dep", "Surg")

_METHOD_ALIASES = {m.lower(): m for m in METHODS}


class EvaluateError(Exception):
    pass


def normalize_method(name: str) -> str:
    try:
        return _METHOD_ALIASES[name.lower().rstrip(".")]
    except KeyError:
        raise EvaluateError(f"unknown method {name!r}; expected one of {METHODS}") from None


@dataclass(frozen=True)
class CellOccupancy:
    key: CellKey
    planned_min: int
    actual_min: int
    capacity_min: int

    @property
    def occupancy_pct(self) -> float:
        return 100.0 * self.actual_min / self.capacity_min


@dataclass(frozen=True)
class OccupancyTable:
    """Realized usage of every cell that hosts at least one patient."""

    cells: tuple[CellOccupancy, ...]


@dataclass(frozen=True)
class OccupancyStats:
    mean: float
    std: float
    min: float
    max: float


@dataclass(frozen=True)
class MethodReport:
    method: str
    occ_mean: float
    occ_std: float
    occ_min: float
    occ_max: float
    overbooked: int
    underbooked: int

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "occ_mean": self.occ_mean,
            "occ_std": self.occ_std,
            "occ_min": self.occ_min,
            "occ_max": self.occ_max,
            "overbooked": self.overbooked,
            "underbooked": self.underbooked,
        }


def replay(schedule: Schedule, instance: ProblemInstance) -> OccupancyTable:
    """Realized per-cell usage from actual durations.

    Only cells with at least one assignment appear; structurally empty cells
    say nothing about booking quality.
    """
    regs = {r.id: r for r in instance.registrations}
    missing = sorted(
        a.registration_id
        for a in schedule.assignments
        if regs.get(a.registration_id) is None or regs[a.registration_id].actual_duration_min is None
    )
    if missing:
        raise EvaluateError(f"missing actual durations for: {', '.join(missing)}")

    capacity = {s.shift_id: s.capacity_min for s in instance.shifts}
    planned: dict[CellKey, int] = {}
    actual: dict[CellKey, int] = {}
    for a in schedule.assignments:
        key = CellKey(a.or_id, a.day, a.shift_id)
        reg = regs[a.registration_id]
        planned[key] = planned.get(key, 0) + reg.duration_min
        actual[key] = actual.get(key, 0) + (reg.actual_duration_min or 0)

    cells = tuple(
        CellOccupancy(key, planned[key], actual[key], capacity[key.shift_id])
        for key in sorted(planned)
    )
    return OccupancyTable(cells)


def booking_counts(
    table: OccupancyTable, under_threshold: float = 80.0, over_threshold: float = 100.0
) -> tuple[int, int]:
    """(underbooked, overbooked) cell counts; boundary values count as neither."""
    under = sum(1 for c in table.cells if c.occupancy_pct < under_threshold)
    over = sum(1 for c in table.cells if c.occupancy_pct > over_threshold)
    return under, over


def occupancy_stats(table: OccupancyTable) -> OccupancyStats:
    """Mean, population standard deviation, min and max of cell occupancy."""
    if not table.cells:
        raise EvaluateError("occupancy stats need at least one used cell")
    values = [c.occupancy_pct for c in table.cells]
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / len(values)
    return OccupancyStats(mean=mean, std=var**0.5, min=min(values), max=max(values))


# ---------------------------------------------------------------------------
# method comparison


@dataclass(frozen=True)
class DurationEstimates:
    """Per-registration duration estimates feeding the non-VBA methods.

    ``predicted`` comes from the trained model; the mean maps from the
    historical baselines. Only the maps needed by the requested methods are
    required.
    """

    predicted: Mapping[str, float] | None = None
    department_mean: Mapping[str, float] | None = None
    procedure_mean: Mapping[str, float] | None = None


def _estimate_for(method: str, reg: Registration, estimates: DurationEstimates) -> float:
    if method == "VBA":
        if reg.actual_duration_min is None:
            raise EvaluateError(f"VBA needs the actual duration of {reg.id!r}")
        return float(reg.actual_duration_min)
    source = {
        "Conf": estimates.predicted,
        "Pred": estimates.predicted,
        "Dep": estimates.department_mean,
        "Surg": estimates.procedure_mean,
    }[method]
    if source is None or reg.id not in source:
        raise EvaluateError(f"method {method} lacks a duration estimate for {reg.id!r}")
    return float(source[reg.id])


def apply_method_durations(
    instance: ProblemInstance, method: str, estimates: DurationEstimates
) -> ProblemInstance:
    """The instance the given method actually solves: planned durations set
    per method, and prediction confidence attached whenever it is computable
    (model prediction plus known actual), so every report can state the
    confidence tiers even though only Conf optimizes them."""
    method = normalize_method(method)
    registrations = []
    for reg in instance.registrations:
        duration = max(1, round(_estimate_for(method, reg, estimates)))
        confidence: ConfidenceLevel | None = reg.confidence
        if (
            estimates.predicted is not None
            and reg.id in estimates.predicted
            and reg.actual_duration_min is not None
        ):
            confidence = confidence_level(ape(reg.actual_duration_min, estimates.predicted[reg.id]))
        registrations.append(
            Registration(
                id=reg.id,
                priority=reg.priority,
                specialty=reg.specialty,
                duration_min=duration,
                actual_duration_min=reg.actual_duration_min,
                confidence=confidence,
            )
        )
    return ProblemInstance(
        registrations=tuple(registrations),
        mss=instance.mss,
        shifts=instance.shifts,
        planning_days=instance.planning_days,
        emergency_or_id=instance.emergency_or_id,
    )


def evaluate_schedule(method: str, schedule: Schedule, instance: ProblemInstance) -> MethodReport:
    table = replay(schedule, instance)
    stats = occupancy_stats(table)
    under, over = booking_counts(table)
    return MethodReport(
        method=normalize_method(method),
        occ_mean=stats.mean,
        occ_std=stats.std,
        occ_min=stats.min,
        occ_max=stats.max,
        overbooked=over,
        underbooked=under,
    )


def run_method_comparison(
    instance: ProblemInstance,
    estimates: DurationEstimates,
    methods: Sequence[str] = METHODS,
    limits: SolveLimits = SolveLimits(),
    solver: str | None = None,
) -> list[MethodReport]:
    """Solve the same week once per method and replay each schedule against
    the actual durations. Confidence tiers enter the solver objective only
    for Conf; every method gets identical limits."""
    if not methods:
        raise EvaluateError("empty method list")
    reports = []
    for name in methods:
        method = normalize_method(name)
        method_instance = apply_method_durations(instance, method, estimates)
        schedule, _ = solve_auto(
            method_instance,
            limits,
            confidence_objective=(method == "Conf"),
            prefer=solver,
        )
        reports.append(evaluate_schedule(method, schedule, method_instance))
    return reports


# ---------------------------------------------------------------------------
# report files

_COLUMNS = ("method", "occ_mean", "occ_std", "occ_max", "occ_min", "overbooked", "underbooked")


def format_report_table(reports_by_hospital: Mapping[str, Sequence[MethodReport]]) -> str:
    """Fixed-width per-hospital table: one row per method, occupancy
    percentages rounded to integers, std with two decimals."""
    lines = []
    for hospital in reports_by_hospital:
        lines.append(f"== {hospital} ==")
        lines.append(
            f"{'method':<8}{'% occ (mean)':>14}{'occ (std)':>12}{'% occ (max)':>13}"
            f"{'% occ (min)':>13}{'overbooking':>13}{'underbooking':>14}"
        )
        for r in reports_by_hospital[hospital]:
            lines.append(
                f"{r.method:<8}{round(r.occ_mean):>14}{r.occ_std:>12.2f}{round(r.occ_max):>13}"
                f"{round(r.occ_min):>13}{r.overbooked:>13}{r.underbooked:>14}"
            )
        lines.append("")
    return "\n".join(lines)


def write_report_json(reports_by_hospital: Mapping[str, Sequence[MethodReport]], path: str | Path) -> None:
    payload = [
        {"hospital": hospital, **report.to_json_dict()}
        for hospital, reports in reports_by_hospital.items()
        for report in reports
    ]
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def write_report_txt(reports_by_hospital: Mapping[str, Sequence[MethodReport]], path: str | Path) -> None:
    Path(path).write_text(format_report_table(reports_by_hospital), encoding="utf-8")

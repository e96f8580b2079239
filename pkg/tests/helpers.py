"""Shared builders for solver and evaluation tests."""

from __future__ import annotations

import random

from orsched.core import (
    ConfidenceLevel,
    MssSlot,
    ProblemInstance,
    Registration,
    Shift,
)


def reg(
    rid: str,
    priority: int = 2,
    specialty: str = "GEN",
    duration: int = 4,
    actual: int | None = None,
    confidence: int | None = None,
) -> Registration:
    return Registration(
        id=rid,
        priority=priority,
        specialty=specialty,
        duration_min=duration,
        actual_duration_min=actual,
        confidence=ConfidenceLevel(confidence) if confidence is not None else None,
    )


def instance(
    registrations,
    cells,
    capacities,
    emergency_or_id: str | None = None,
    planning_days: int | None = None,
) -> ProblemInstance:
    """Build an instance from (or_id, specialty, shift_id, day) cell tuples and
    a {shift_id: capacity} map."""
    mss = tuple(MssSlot(*c) for c in cells)
    shifts = tuple(Shift(sid, cap) for sid, cap in sorted(capacities.items()))
    days = planning_days if planning_days is not None else (max((s.day for s in mss), default=0) + 1)
    return ProblemInstance(
        registrations=tuple(registrations),
        mss=mss,
        shifts=shifts,
        planning_days=days,
        emergency_or_id=emergency_or_id,
    )


def single_cell_instance(registrations, capacity: int = 10, specialty: str = "GEN") -> ProblemInstance:
    return instance(registrations, [("R1", specialty, "S1", 0)], {"S1": capacity})


def random_instance(
    rng: random.Random,
    max_regs: int = 10,
    max_cells: int = 4,
    with_confidence: bool = True,
    p1_weight: float = 0.25,
) -> ProblemInstance:
    """A small random instance for oracle comparison; may be infeasible."""
    n_regs = rng.randint(1, max_regs)
    n_cells = rng.randint(1, max_cells)
    specialties = ["GEN", "ORT"][: rng.randint(1, 2)]

    shared_shift = rng.random() < 0.3
    cells = []
    caps = {}
    made = set()
    # the (or, day) grid must exceed max_cells or the rejection loop stalls
    n_ors = max(3, (n_cells + 2) // 3)
    while len(cells) < n_cells:
        or_id = f"R{rng.randint(1, n_ors)}"
        day = rng.randint(0, 2)
        shift_id = "S0" if shared_shift else f"S{len(cells)}"
        if (or_id, shift_id, day) in made:
            continue
        made.add((or_id, shift_id, day))
        cells.append((or_id, rng.choice(specialties), shift_id, day))
        caps.setdefault(shift_id, rng.randint(5, 14))

    regs = []
    for i in range(n_regs):
        r = rng.random()
        priority = 1 if r < p1_weight else rng.randint(2, 4)
        regs.append(
            reg(
                f"p{i:02d}",
                priority=priority,
                specialty=rng.choice(specialties),
                duration=rng.randint(1, 8),
                confidence=rng.randint(1, 4) if with_confidence and rng.random() < 0.75 else None,
            )
        )

    emergency = None
    if rng.random() < 0.3:
        emergency = cells[rng.randrange(len(cells))][0]
    return instance(regs, cells, caps, emergency_or_id=emergency)

"""Schedule solvers: feasibility checking, lexicographic objectives, an exact
branch-and-bound for small instances, and an anytime restart heuristic.

Hard constraints:
  * each registration assigned at most once;
  * per-cell assigned duration within the shift capacity;
  * every priority-1 registration assigned;
  * assignment specialty matches the MSS cell specialty;
  * the emergency OR (when configured) hosts at most one patient over the
    whole horizon.

The objective is minimized lexicographically: unassigned counts per priority
tier first (p1 highest), then the maximum per-cell confidence sum, then the
max-minus-min confidence spread across cells. Every MSS cell participates in
the confidence aggregates, empty cells with sum 0.
"""

from __future__ import annotations

import csv
import json
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

from orsched.core import (
    Assignment,
    ObjectiveVector,
    ProblemInstance,
    Registration,
    Schedule,
    Violation,
    validate_instance,
)


class CellKey(NamedTuple):
    """Identity of one MSS cell."""

    or_id: str
    day: int
    shift_id: str


@dataclass(frozen=True)
class SolveLimits:
    """Resource limits for a solver run.

    ``node_limit`` caps branch-and-bound nodes; ``max_restarts`` caps
    heuristic restarts (useful for exactly reproducible runs regardless of
    machine speed). ``None`` means unlimited within the time budget.
    """

    time_budget_s: float = 60.0
    node_limit: int | None = None
    threads: int = 1
    seed: int = 0
    max_restarts: int | None = None


class SolverError(Exception):
    pass


class InfeasibleInstanceError(SolverError):
    """No schedule can host every priority-1 registration."""

    def __init__(self, p1_ids: list[str], message: str):
        super().__init__(message)
        self.p1_ids = p1_ids


class IncompleteSearchError(SolverError):
    """The search hit its budget before proving optimality.

    ``incumbent`` carries the best feasible schedule found so far, or None
    if none was reached.
    """

    def __init__(self, incumbent: Schedule | None, wall_time_s: float, reason: str):
        super().__init__(reason)
        self.incumbent = incumbent
        self.wall_time_s = wall_time_s


def compare_lex(a: ObjectiveVector, b: ObjectiveVector) -> int:
    """Lexicographic comparison, highest tier first; -1 means ``a`` is better."""
    ta, tb = a.as_tuple(), b.as_tuple()
    return (ta > tb) - (ta < tb)


def is_feasible(schedule: Schedule, instance: ProblemInstance) -> list[Violation]:
    """Check every hard constraint; empty list means the schedule is feasible."""
    violations: list[Violation] = []
    regs = {r.id: r for r in instance.registrations}
    cells = {CellKey(s.or_id, s.day, s.shift_id): s for s in instance.mss}
    capacity = {s.shift_id: s.capacity_min for s in instance.shifts}

    seen: set[str] = set()
    loads: dict[CellKey, int] = {k: 0 for k in cells}
    emergency_count = 0

    for a in schedule.assignments:
        if a.registration_id in seen:
            violations.append(Violation("multiple_assignment", f"registration {a.registration_id!r} assigned more than once"))
        seen.add(a.registration_id)

        reg = regs.get(a.registration_id)
        if reg is None or reg.priority != a.priority:
            violations.append(Violation("unknown_registration", f"assignment references {a.registration_id!r} (priority {a.priority})"))
            continue
        key = CellKey(a.or_id, a.day, a.shift_id)
        slot = cells.get(key)
        if slot is None:
            violations.append(Violation("unknown_cell", f"assignment {a.registration_id!r} targets missing cell {key}"))
            continue
        if slot.specialty != reg.specialty:
            violations.append(
                Violation("specialty_mismatch", f"registration {a.registration_id!r} ({reg.specialty}) in {slot.specialty} cell {key}")
            )
        loads[key] += reg.duration_min
        if instance.emergency_or_id is not None and a.or_id == instance.emergency_or_id:
            emergency_count += 1

    for key, load in loads.items():
        cap = capacity.get(key.shift_id)
        if cap is not None and load > cap:
            violations.append(Violation("capacity_exceeded", f"cell {key} load {load} exceeds capacity {cap}"))

    for reg in instance.registrations:
        if reg.priority == 1 and reg.id not in seen:
            violations.append(Violation("p1_unassigned", f"priority-1 registration {reg.id!r} not assigned"))

    if emergency_count > 1:
        violations.append(
            Violation("emergency_or_overused", f"emergency OR {instance.emergency_or_id!r} hosts {emergency_count} patients")
        )
    return violations


def objective_vector(schedule: Schedule, instance: ProblemInstance, confidence_scale: int = 1) -> ObjectiveVector:
    """Evaluate the six lexicographic components of a schedule.

    ``confidence_scale`` multiplies every confidence level before aggregation;
    it exists so tests can check that scaling leaves optimal assignment
    patterns unchanged.
    """
    regs = {r.id: r for r in instance.registrations}
    assigned = schedule.assigned_ids()

    unassigned = [0, 0, 0, 0]
    for reg in instance.registrations:
        if reg.id not in assigned and reg.priority in (1, 2, 3, 4):
            unassigned[reg.priority - 1] += 1

    sums: dict[CellKey, int] = {CellKey(s.or_id, s.day, s.shift_id): 0 for s in instance.mss}
    for a in schedule.assignments:
        reg = regs.get(a.registration_id)
        key = CellKey(a.or_id, a.day, a.shift_id)
        if reg is not None and reg.confidence is not None and key in sums:
            sums[key] += reg.confidence.level * confidence_scale

    if sums:
        max_sum = max(sums.values())
        spread = max_sum - min(sums.values())
    else:
        max_sum = spread = 0
    return ObjectiveVector(*unassigned, max_sum, spread)


# ---------------------------------------------------------------------------
# shared solver model


class _Cell(NamedTuple):
    key: CellKey
    specialty: str
    capacity: int
    emergency: bool


class _Model:
    """Instance unpacked into index-based arrays for search."""

    def __init__(self, instance: ProblemInstance, confidence_scale: int):
        report = validate_instance(instance)
        if not report.ok:
            raise ValueError(f"instance fails validation: {[v.code for v in report]}")
        self.instance = instance
        capacity = {s.shift_id: s.capacity_min for s in instance.shifts}
        cells = [
            _Cell(
                CellKey(s.or_id, s.day, s.shift_id),
                s.specialty,
                capacity[s.shift_id],
                instance.emergency_or_id is not None and s.or_id == instance.emergency_or_id,
            )
            for s in instance.mss
        ]
        cells.sort(key=lambda c: c.key)
        self.cells = cells
        # canonical search order: priorities first, then big rocks, then id
        self.regs: list[Registration] = sorted(
            instance.registrations, key=lambda r: (r.priority, -r.duration_min, r.id)
        )
        self.dur = [r.duration_min for r in self.regs]
        self.prio = [r.priority for r in self.regs]
        self.conf = [
            (r.confidence.level * confidence_scale) if r.confidence is not None else 0 for r in self.regs
        ]
        self.compat: list[list[int]] = [
            [ci for ci, c in enumerate(cells) if c.specialty == r.specialty] for r in self.regs
        ]
        self.compat_sets = [set(cs) for cs in self.compat]

    def p1_ids(self) -> list[str]:
        return sorted(r.id for r in self.regs if r.priority == 1)

    def build_schedule(self, choice: list[int | None]) -> Schedule:
        assignments = []
        for ri, ci in enumerate(choice):
            if ci is None:
                continue
            reg, key = self.regs[ri], self.cells[ci].key
            assignments.append(Assignment(reg.id, reg.priority, key.or_id, key.day, key.shift_id))
        assignments.sort(key=lambda a: (a.registration_id, a.day, a.or_id, a.shift_id))
        sched = Schedule(tuple(assignments), ObjectiveVector(0, 0, 0, 0, 0, 0))
        return Schedule(sched.assignments, self.objective(choice))

    def objective(self, choice: list[int | None]) -> ObjectiveVector:
        unassigned = [0, 0, 0, 0]
        sums = [0] * len(self.cells)
        for ri, ci in enumerate(choice):
            if ci is None:
                unassigned[self.prio[ri] - 1] += 1
            else:
                sums[ci] += self.conf[ri]
        if sums:
            mx, mn = max(sums), min(sums)
        else:
            mx = mn = 0
        return ObjectiveVector(*unassigned, mx, mx - mn)

    def tie_key(self, choice: list[int | None]) -> tuple:
        items = []
        for ri, ci in enumerate(choice):
            if ci is not None:
                key = self.cells[ci].key
                items.append((self.regs[ri].id, key.day, key.or_id, key.shift_id))
        return tuple(sorted(items))


# ---------------------------------------------------------------------------
# exact branch and bound


class _Abort(Exception):
    def __init__(self, reason: str):
        self.reason = reason


class _ExactSearch:
    """Depth-first branch and bound over per-registration choices.

    Explores, for each registration in canonical order, every compatible cell
    with room (and the unassigned option for priorities 2-4). Prunes a branch
    only when its optimistic bound is strictly worse than the incumbent, so
    all objective-equal optima are visited and the canonical tie-break
    (smallest sorted assignment tuple sequence) is exact.
    """

    def __init__(self, model: _Model, limits: SolveLimits, confidence_active: bool):
        self.m = model
        self.limits = limits
        self.conf_active = confidence_active
        self.n = len(model.regs)
        self.n_cells = len(model.cells)
        self.loads = [0] * self.n_cells
        self.sums = [0] * self.n_cells
        self.unassigned = [0, 0, 0, 0]
        self.em_used = 0
        self.choice: list[int | None] = [None] * self.n
        self.nodes = 0
        self.deadline = time.monotonic() + limits.time_budget_s
        self.best_choice: list[int | None] | None = None
        self.best_active: tuple | None = None
        self.best_key: tuple | None = None

    def run(self) -> Schedule:
        for ri in range(self.n):
            if self.m.prio[ri] == 1 and not any(
                self.m.dur[ri] <= self.m.cells[ci].capacity for ci in self.m.compat[ri]
            ):
                raise InfeasibleInstanceError(
                    self.m.p1_ids(),
                    f"priority-1 registration {self.m.regs[ri].id!r} fits no compatible cell",
                )
        start = time.monotonic()
        try:
            self._dfs(0)
        except _Abort as abort:
            incumbent = self.m.build_schedule(self.best_choice) if self.best_choice is not None else None
            raise IncompleteSearchError(incumbent, time.monotonic() - start, abort.reason) from None
        if self.best_choice is None:
            raise InfeasibleInstanceError(self.m.p1_ids(), "no feasible schedule hosts every priority-1 registration")
        return self.m.build_schedule(self.best_choice)

    def _tick(self) -> None:
        self.nodes += 1
        if self.limits.node_limit is not None and self.nodes > self.limits.node_limit:
            raise _Abort("node limit reached before optimality was proven")
        if self.nodes % 512 == 0 and time.monotonic() > self.deadline:
            raise _Abort("time budget exhausted before optimality was proven")

    def _active(self, counts: tuple, mx: int, spread: int) -> tuple:
        return counts + (mx, spread) if self.conf_active else counts

    def _leaf(self) -> None:
        counts = tuple(self.unassigned)
        mx = max(self.sums) if self.sums else 0
        spread = mx - min(self.sums) if self.sums else 0
        active = self._active(counts, mx, spread)
        if self.best_active is None or active < self.best_active:
            self.best_active = active
            self.best_choice = list(self.choice)
            self.best_key = self.m.tie_key(self.choice)
        elif active == self.best_active:
            key = self.m.tie_key(self.choice)
            if self.best_key is None or key < self.best_key:
                self.best_choice = list(self.choice)
                self.best_key = key

    def _placeable(self, ri: int) -> bool:
        dur = self.m.dur[ri]
        for ci in self.m.compat[ri]:
            cell = self.m.cells[ci]
            if self.loads[ci] + dur <= cell.capacity and (not cell.emergency or self.em_used == 0):
                return True
        return False

    def _dfs(self, i: int) -> None:
        self._tick()
        if i == self.n:
            self._leaf()
            return

        # optimistic bound: decided contributions plus registrations that can
        # no longer fit anywhere in this subtree
        forced = [0, 0, 0, 0]
        for j in range(i, self.n):
            if not self._placeable(j):
                if self.m.prio[j] == 1:
                    return  # no feasible completion below this node
                forced[self.m.prio[j] - 1] += 1
        if self.best_active is not None:
            counts_lb = tuple(u + f for u, f in zip(self.unassigned, forced))
            mx = max(self.sums) if self.conf_active and self.sums else 0
            bound = self._active(counts_lb, mx, 0)
            if bound > self.best_active:
                return

        dur, prio = self.m.dur[i], self.m.prio[i]
        conf = self.m.conf[i]
        for ci in self.m.compat[i]:
            cell = self.m.cells[ci]
            if self.loads[ci] + dur > cell.capacity or (cell.emergency and self.em_used > 0):
                continue
            self.choice[i] = ci
            self.loads[ci] += dur
            self.sums[ci] += conf
            self.em_used += cell.emergency
            self._dfs(i + 1)
            self.em_used -= cell.emergency
            self.sums[ci] -= conf
            self.loads[ci] -= dur
            self.choice[i] = None
        if prio > 1:
            self.unassigned[prio - 1] += 1
            self._dfs(i + 1)
            self.unassigned[prio - 1] -= 1


def solve_exact(
    instance: ProblemInstance,
    limits: SolveLimits = SolveLimits(),
    *,
    confidence_objective: bool = True,
    confidence_scale: int = 1,
) -> Schedule:
    """Find the lexicographically minimal feasible schedule, with proof.

    Intended for small instances (roughly up to 15 registrations and a dozen
    cells). Raises ``InfeasibleInstanceError`` when the priority-1 demand
    cannot be hosted and ``IncompleteSearchError`` (incumbent attached) when
    the time or node budget runs out first. Deterministic for a fixed
    instance: ties are broken by the smallest sorted assignment tuple
    sequence, so the result does not depend on registration order.
    """
    model = _Model(instance, confidence_scale)
    return _ExactSearch(model, limits, confidence_objective).run()


# ---------------------------------------------------------------------------
# anytime heuristic: greedy best-fit-decreasing + first-improvement local search


class _HeurState:
    def __init__(self, model: _Model, confidence_active: bool):
        self.m = model
        self.conf_active = confidence_active
        self.n_cells = len(model.cells)
        self.choice: list[int | None] = [None] * len(model.regs)
        self.loads = [0] * self.n_cells
        self.sums = [0] * self.n_cells
        self.unassigned = [0, 0, 0, 0]
        self.em_used = 0
        for ri in range(len(model.regs)):
            self.unassigned[model.prio[ri] - 1] += 1

    def can_place(self, ri: int, ci: int) -> bool:
        cell = self.m.cells[ci]
        return (
            ci in self.m.compat_sets[ri]
            and self.loads[ci] + self.m.dur[ri] <= cell.capacity
            and (not cell.emergency or self.em_used == 0)
        )

    def place(self, ri: int, ci: int) -> None:
        self.choice[ri] = ci
        self.loads[ci] += self.m.dur[ri]
        self.sums[ci] += self.m.conf[ri]
        self.em_used += self.m.cells[ci].emergency
        self.unassigned[self.m.prio[ri] - 1] -= 1

    def remove(self, ri: int) -> int:
        ci = self.choice[ri]
        assert ci is not None
        self.choice[ri] = None
        self.loads[ci] -= self.m.dur[ri]
        self.sums[ci] -= self.m.conf[ri]
        self.em_used -= self.m.cells[ci].emergency
        self.unassigned[self.m.prio[ri] - 1] += 1
        return ci

    def active(self) -> tuple:
        counts = tuple(self.unassigned)
        if not self.conf_active:
            return counts
        mx = max(self.sums) if self.sums else 0
        mn = min(self.sums) if self.sums else 0
        return counts + (mx, mx - mn)

    def occupants(self, ci: int) -> list[int]:
        return [ri for ri, c in enumerate(self.choice) if c == ci]


class _Heuristic:
    def __init__(self, model: _Model, limits: SolveLimits, confidence_active: bool):
        self.m = model
        self.limits = limits
        self.conf_active = confidence_active
        self.deadline = time.monotonic() + limits.time_budget_s

    # -- greedy construction ------------------------------------------------

    def _greedy(self, rng: random.Random | None) -> _HeurState:
        state = _HeurState(self.m, self.conf_active)
        by_tier: dict[int, list[int]] = {1: [], 2: [], 3: [], 4: []}
        for ri in range(len(self.m.regs)):
            by_tier[self.m.prio[ri]].append(ri)
        retry: list[int] = []
        for tier in (1, 2, 3, 4):
            order = by_tier[tier]
            if rng is not None:
                order = order[:]
                rng.shuffle(order)
            for ri in order:
                if not self._best_fit(state, ri, rng) and tier == 1:
                    if not self._repair_p1(state, ri, retry):
                        raise InfeasibleInstanceError(
                            self.m.p1_ids(),
                            f"greedy repair could not place priority-1 registration {self.m.regs[ri].id!r}",
                        )
        for ri in retry:
            self._best_fit(state, ri, rng)
        return state

    def _best_fit(self, state: _HeurState, ri: int, rng: random.Random | None) -> bool:
        best_ci, best_slack = None, None
        candidates = []
        for ci in self.m.compat[ri]:
            if not state.can_place(ri, ci):
                continue
            slack = self.m.cells[ci].capacity - state.loads[ci] - self.m.dur[ri]
            if best_slack is None or slack < best_slack:
                best_slack, best_ci = slack, ci
                candidates = [ci]
            elif slack == best_slack:
                candidates.append(ci)
        if best_ci is None:
            return False
        if rng is not None and len(candidates) > 1:
            best_ci = candidates[rng.randrange(len(candidates))]
        state.place(ri, best_ci)
        return True

    def _repair_p1(self, state: _HeurState, ri: int, retry: list[int]) -> bool:
        dur = self.m.dur[ri]
        # first try relocating a single occupant to make room
        for ci in self.m.compat[ri]:
            cell = self.m.cells[ci]
            if cell.emergency and state.em_used > 0:
                continue
            free = cell.capacity - state.loads[ci]
            for occ in sorted(state.occupants(ci)):
                if free + self.m.dur[occ] < dur:
                    continue
                state.remove(occ)
                moved = False
                for ci2 in self.m.compat[occ]:
                    if ci2 != ci and state.can_place(occ, ci2):
                        state.place(occ, ci2)
                        moved = True
                        break
                if moved:
                    state.place(ri, ci)
                    return True
                state.place(occ, ci)
        # then eject the smallest sufficient set of lower-priority occupants
        best = None
        for ci in self.m.compat[ri]:
            cell = self.m.cells[ci]
            if cell.emergency and state.em_used > 0:
                continue
            free = cell.capacity - state.loads[ci]
            ejectable = sorted(
                (occ for occ in state.occupants(ci) if self.m.prio[occ] > 1),
                key=lambda occ: (self.m.prio[occ], self.m.dur[occ], self.m.regs[occ].id),
                reverse=True,
            )
            chosen, gained = [], 0
            for occ in ejectable:
                if free + gained >= dur:
                    break
                chosen.append(occ)
                gained += self.m.dur[occ]
            if free + gained >= dur and (best is None or len(chosen) < len(best[1])):
                best = (ci, chosen)
        if best is None:
            return False
        ci, chosen = best
        for occ in chosen:
            state.remove(occ)
            retry.append(occ)
        state.place(ri, ci)
        return True

    # -- local search ---------------------------------------------------------

    def _local_search(self, state: _HeurState) -> None:
        while time.monotonic() < self.deadline:
            if not self._improve_once(state):
                break

    def _improve_once(self, state: _HeurState) -> bool:
        current = state.active()
        n = len(self.m.regs)
        unassigned = [ri for ri in range(n) if state.choice[ri] is None]
        assigned = [ri for ri in range(n) if state.choice[ri] is not None]

        # insert an unassigned registration
        for ri in unassigned:
            for ci in self.m.compat[ri]:
                if state.can_place(ri, ci):
                    state.place(ri, ci)
                    if state.active() < current:
                        return True
                    state.remove(ri)

        # insert enabled by relocating one blocking occupant
        for ri in unassigned:
            dur = self.m.dur[ri]
            for ci in self.m.compat[ri]:
                cell = self.m.cells[ci]
                free = cell.capacity - state.loads[ci]
                if free >= dur:
                    continue  # plain insert already failed on other grounds
                for occ in sorted(state.occupants(ci)):
                    if free + self.m.dur[occ] < dur:
                        continue
                    state.remove(occ)
                    for ci2 in self.m.compat[occ]:
                        if ci2 != ci and state.can_place(occ, ci2):
                            state.place(occ, ci2)
                            if state.can_place(ri, ci):
                                state.place(ri, ci)
                                if state.active() < current:
                                    return True
                                state.remove(ri)
                            state.remove(occ)
                            break
                    state.place(occ, ci)

        # replace an assigned registration by an unassigned one
        for ri in unassigned:
            for occ in assigned:
                ci = state.choice[occ]
                if ci not in self.m.compat_sets[ri]:
                    continue
                state.remove(occ)
                if state.can_place(ri, ci):
                    state.place(ri, ci)
                    if state.active() < current:
                        return True
                    state.remove(ri)
                state.place(occ, ci)

        if not self.conf_active:
            return False

        # relocate one assignment (confidence balancing only)
        for ri in assigned:
            ci = state.choice[ri]
            state.remove(ri)
            for ci2 in self.m.compat[ri]:
                if ci2 != ci and state.can_place(ri, ci2):
                    state.place(ri, ci2)
                    if state.active() < current:
                        return True
                    state.remove(ri)
            state.place(ri, ci)

        # swap two assignments across cells (confidence balancing only)
        for ai in range(len(assigned)):
            for bi in range(ai + 1, len(assigned)):
                ra, rb = assigned[ai], assigned[bi]
                ca, cb = state.choice[ra], state.choice[rb]
                if ca == cb:
                    continue
                if cb not in self.m.compat_sets[ra] or ca not in self.m.compat_sets[rb]:
                    continue
                state.remove(ra)
                state.remove(rb)
                if state.can_place(ra, cb) and state.can_place(rb, ca):
                    state.place(ra, cb)
                    state.place(rb, ca)
                    if state.active() < current:
                        return True
                    state.remove(ra)
                    state.remove(rb)
                state.place(ra, ca)
                state.place(rb, cb)
        return False

    # -- restart loop -----------------------------------------------------------

    def _one_restart(self, restart_index: int, seed: int) -> tuple[tuple, tuple, list[int | None]]:
        rng = None if restart_index == 0 else random.Random(seed)
        state = self._greedy(rng)
        self._local_search(state)
        return state.active(), self.m.tie_key(state.choice), list(state.choice)

    def run(self) -> Schedule:
        best: tuple[tuple, tuple, list[int | None]] | None = None
        seed_rng = random.Random(self.limits.seed)
        max_restarts = self.limits.max_restarts

        def consider(result: tuple[tuple, tuple, list[int | None]]) -> None:
            nonlocal best
            if best is None or (result[0], result[1]) < (best[0], best[1]):
                best = result

        consider(self._one_restart(0, 0))  # canonical greedy always runs
        assert best is not None
        if not any(best[0]):
            return self.m.build_schedule(best[2])  # all-zero objective is unbeatable

        index = 1
        if self.limits.threads > 1:
            with ThreadPoolExecutor(max_workers=self.limits.threads) as pool:
                while (max_restarts is None or index < max_restarts) and time.monotonic() < self.deadline:
                    batch = []
                    while len(batch) < self.limits.threads and (max_restarts is None or index < max_restarts):
                        batch.append((index, seed_rng.getrandbits(63)))
                        index += 1
                    for fut in [pool.submit(self._one_restart, i, s) for i, s in batch]:
                        consider(fut.result())
        else:
            while (max_restarts is None or index < max_restarts) and time.monotonic() < self.deadline:
                consider(self._one_restart(index, seed_rng.getrandbits(63)))
                index += 1

        return self.m.build_schedule(best[2])


def solve_heuristic(
    instance: ProblemInstance,
    limits: SolveLimits = SolveLimits(),
    *,
    confidence_objective: bool = True,
    confidence_scale: int = 1,
) -> Schedule:
    """Anytime solver: greedy best-fit-decreasing construction followed by
    first-improvement local search with seeded restarts until the budget.

    Always returns a feasible schedule that is lexicographically at least as
    good as the canonical greedy construction. Reproducible for a fixed seed
    when ``max_restarts`` bounds the run (a purely time-bounded run is
    deterministic only in the number of restarts that complete).
    """
    model = _Model(instance, confidence_scale)
    return _Heuristic(model, limits, confidence_objective).run()


def solve_auto(
    instance: ProblemInstance,
    limits: SolveLimits = SolveLimits(),
    *,
    confidence_objective: bool = True,
    prefer: str | None = None,
) -> tuple[Schedule, bool]:
    """Pick a solver and report whether the result is a proven optimum.

    ``prefer`` forces "exact" or "heuristic"; the default sends small
    instances to branch-and-bound. An exact run that exhausts its budget
    degrades to its incumbent (or a heuristic run) with the proof flag off.
    """
    if prefer not in (None, "exact", "heuristic"):
        raise ValueError(f"prefer must be 'exact', 'heuristic' or None, got {prefer!r}")
    small = (
        len(instance.registrations) <= 12
        and len(instance.registrations) * max(1, len(instance.mss)) <= 60
    )
    if prefer == "exact" or (prefer is None and small):
        try:
            return solve_exact(instance, limits, confidence_objective=confidence_objective), True
        except IncompleteSearchError as err:
            if err.incumbent is not None:
                return err.incumbent, False
    return solve_heuristic(instance, limits, confidence_objective=confidence_objective), False


# ---------------------------------------------------------------------------
# file formats

SCHEDULE_HEADER = ["registration_id", "priority", "or_id", "day", "shift_id"]


def write_schedule_csv(schedule: Schedule, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SCHEDULE_HEADER)
        for a in schedule.assignments:
            writer.writerow([a.registration_id, a.priority, a.or_id, a.day, a.shift_id])


def read_schedule_csv(path: str | Path) -> tuple[Assignment, ...]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        assignments = tuple(
            Assignment(row["registration_id"], int(row["priority"]), row["or_id"], int(row["day"]), row["shift_id"])
            for row in reader
        )
    return assignments


def write_objective_json(schedule: Schedule, proven_optimal: bool, wall_time_s: float, path: str | Path) -> None:
    payload = dict(schedule.objective.to_json_dict())
    payload["proven_optimal"] = proven_optimal
    payload["wall_time_s"] = wall_time_s
    Path(path).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")

"""Solver tests: feasibility, objective semantics, exact and heuristic search."""

import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import instance, random_instance, reg, single_cell_instance
from oracle import brute_force_best, schedule_pattern

from orsched.core import Assignment, ObjectiveVector, Schedule
from orsched.solve import (
    IncompleteSearchError,
    InfeasibleInstanceError,
    SolveLimits,
    compare_lex,
    is_feasible,
    objective_vector,
    read_schedule_csv,
    solve_exact,
    solve_heuristic,
    write_schedule_csv,
)

FAST = SolveLimits(time_budget_s=10.0)


def sched(*assignments) -> Schedule:
    return Schedule(tuple(assignments), ObjectiveVector(0, 0, 0, 0, 0, 0))


def asg(rid, prio, or_id="R1", day=0, shift="S1"):
    return Assignment(rid, prio, or_id, day, shift)


# -- is_feasible ------------------------------------------------------------


def test_capacity_within_limit_is_feasible():
    inst = single_cell_instance([reg("a", 1, duration=4), reg("b", 2, duration=4)], capacity=10)
    s = sched(asg("a", 1), asg("b", 2))
    assert is_feasible(s, inst) == []


def test_capacity_overflow_is_violation():
    inst = single_cell_instance([reg("a", 1, duration=6), reg("b", 2, duration=6)], capacity=10)
    s = sched(asg("a", 1), asg("b", 2))
    assert any(v.code == "capacity_exceeded" for v in is_feasible(s, inst))


def test_unassigned_p1_is_violation():
    inst = single_cell_instance([reg("a", 1, duration=4)], capacity=10)
    assert any(v.code == "p1_unassigned" for v in is_feasible(sched(), inst))


def test_specialty_mismatch_and_double_assignment_flagged():
    inst = instance(
        [reg("a", 2, specialty="ORT", duration=3)],
        [("R1", "GEN", "S1", 0), ("R2", "ORT", "S2", 0)],
        {"S1": 10, "S2": 10},
    )
    wrong_cell = sched(asg("a", 2, or_id="R1"))
    assert any(v.code == "specialty_mismatch" for v in is_feasible(wrong_cell, inst))
    doubled = sched(asg("a", 2, or_id="R2", shift="S2"), asg("a", 2, or_id="R2", shift="S2"))
    codes = {v.code for v in is_feasible(doubled, inst)}
    assert "multiple_assignment" in codes


def test_emergency_or_capped_at_one_patient():
    inst = instance(
        [reg("a", 2, duration=2), reg("b", 2, duration=2)],
        [("RA", "GEN", "S1", 0), ("RA", "GEN", "S1", 1)],
        {"S1": 10},
        emergency_or_id="RA",
    )
    s = sched(asg("a", 2, or_id="RA", day=0), asg("b", 2, or_id="RA", day=1))
    assert any(v.code == "emergency_or_overused" for v in is_feasible(s, inst))


# -- objective_vector ---------------------------------------------------------


def test_empty_schedule_counts_unassigned_by_priority():
    inst = single_cell_instance([reg("a", 2), reg("b", 2), reg("c", 2)], capacity=30)
    vec = objective_vector(sched(), inst)
    assert vec.as_tuple() == (0, 3, 0, 0, 0, 0)


def test_empty_cell_participates_in_spread():
    # one cell holds confidences {1,2}, the other is empty: max 3, min 0
    inst = instance(
        [reg("a", 2, duration=2, confidence=1), reg("b", 2, duration=2, confidence=2)],
        [("R1", "GEN", "S1", 0), ("R2", "GEN", "S2", 0)],
        {"S1": 10, "S2": 10},
    )
    s = sched(asg("a", 2, or_id="R1"), asg("b", 2, or_id="R1"))
    vec = objective_vector(s, inst)
    assert vec.max_cell_confidence == 3
    assert vec.confidence_spread == 3


def test_equal_cell_sums_have_zero_spread():
    inst = instance(
        [reg("a", 2, duration=2, confidence=2), reg("b", 2, duration=2, confidence=2)],
        [("R1", "GEN", "S1", 0), ("R2", "GEN", "S2", 0)],
        {"S1": 10, "S2": 10},
    )
    s = sched(asg("a", 2, or_id="R1"), asg("b", 2, or_id="R2", shift="S2"))
    vec = objective_vector(s, inst)
    assert vec.max_cell_confidence == 2
    assert vec.confidence_spread == 0


def test_registrations_without_confidence_contribute_zero():
    inst = single_cell_instance([reg("a", 2, duration=2)], capacity=10)
    s = sched(asg("a", 2))
    assert objective_vector(s, inst).max_cell_confidence == 0


# -- compare_lex ---------------------------------------------------------------


def vec(*t):
    return ObjectiveVector(*t)


def test_higher_tier_dominates():
    a = vec(0, 1, 0, 0, 0, 0)
    b = vec(0, 0, 9, 9, 99, 99)
    assert compare_lex(a, b) == 1
    assert compare_lex(b, a) == -1


def test_equal_vectors_compare_equal():
    assert compare_lex(vec(0, 1, 2, 3, 4, 4), vec(0, 1, 2, 3, 4, 4)) == 0


def test_confidence_tier_breaks_ties():
    assert compare_lex(vec(0, 0, 0, 0, 3, 0), vec(0, 0, 0, 0, 5, 0)) == -1


@given(
    st.tuples(*[st.integers(0, 3)] * 6),
    st.tuples(*[st.integers(0, 3)] * 6),
    st.tuples(*[st.integers(0, 3)] * 6),
)
def test_compare_lex_is_total_order(ta, tb, tc):
    a, b, c = vec(*ta), vec(*tb), vec(*tc)
    assert compare_lex(a, b) == -compare_lex(b, a)
    if compare_lex(a, b) <= 0 and compare_lex(b, c) <= 0:
        assert compare_lex(a, c) <= 0
    if compare_lex(a, b) == 0:
        assert ta == tb


# -- solve_exact -----------------------------------------------------------------


def test_single_cell_priority_packing():
    inst = single_cell_instance(
        [reg("r1", 1, duration=4), reg("r2", 2, duration=4), reg("r3", 2, duration=4)],
        capacity=10,
    )
    s = solve_exact(inst, FAST)
    assert "r1" in s.assigned_ids()
    assert s.objective.as_tuple()[:4] == (0, 1, 0, 0)
    assert brute_force_best(inst)[:4] == (0, 1, 0, 0)


def test_confidence_steers_choice_of_companion():
    inst = single_cell_instance(
        [
            reg("r1", 1, duration=4, confidence=1),
            reg("r2", 2, duration=4, confidence=2),
            reg("r3", 2, duration=4, confidence=4),
        ],
        capacity=10,
    )
    s = solve_exact(inst, FAST)
    assert s.assigned_ids() == {"r1", "r2"}
    assert s.objective.max_cell_confidence == 3
    assert brute_force_best(inst) == s.objective.as_tuple()


def test_oversized_p1_is_infeasible():
    inst = single_cell_instance([reg("r1", 1, duration=20)], capacity=10)
    with pytest.raises(InfeasibleInstanceError) as err:
        solve_exact(inst, FAST)
    assert err.value.p1_ids == ["r1"]


def test_infeasible_joint_p1_demand():
    inst = single_cell_instance([reg("r1", 1, duration=6), reg("r2", 1, duration=6)], capacity=10)
    with pytest.raises(InfeasibleInstanceError):
        solve_exact(inst, FAST)
    assert brute_force_best(inst) is None


def test_exact_result_invariant_under_registration_permutation():
    rng = random.Random(7)
    for _ in range(15):
        inst = random_instance(rng, max_regs=6, max_cells=3)
        regs = list(inst.registrations)
        rng.shuffle(regs)
        shuffled = type(inst)(
            registrations=tuple(regs),
            mss=inst.mss,
            shifts=inst.shifts,
            planning_days=inst.planning_days,
            emergency_or_id=inst.emergency_or_id,
        )
        try:
            a = solve_exact(inst, FAST)
        except InfeasibleInstanceError:
            with pytest.raises(InfeasibleInstanceError):
                solve_exact(shuffled, FAST)
            continue
        b = solve_exact(shuffled, FAST)
        assert a == b


def test_exact_matches_oracle_on_random_batch():
    rng = random.Random(123)
    for _ in range(40):
        inst = random_instance(rng, max_regs=7, max_cells=3)
        expected = brute_force_best(inst)
        if expected is None:
            with pytest.raises(InfeasibleInstanceError):
                solve_exact(inst, FAST)
        else:
            assert solve_exact(inst, FAST).objective.as_tuple() == expected


def test_schedule_objective_is_self_consistent():
    rng = random.Random(5)
    for _ in range(20):
        inst = random_instance(rng, max_regs=6, max_cells=3)
        try:
            s = solve_exact(inst, FAST)
        except InfeasibleInstanceError:
            continue
        assert is_feasible(s, inst) == []
        assert objective_vector(s, inst) == s.objective


def test_adding_assignable_p2_never_improves_optimum():
    # holds for confidence-free instances; an added registration can otherwise
    # still balance the confidence spread
    rng = random.Random(11)
    checked = 0
    while checked < 15:
        inst = random_instance(rng, max_regs=5, max_cells=3, with_confidence=False)
        try:
            base = solve_exact(inst, FAST)
        except InfeasibleInstanceError:
            continue
        specialty = inst.mss[0].specialty
        extra = reg("zz_extra", 2, specialty=specialty, duration=rng.randint(1, 6))
        bigger = type(inst)(
            registrations=inst.registrations + (extra,),
            mss=inst.mss,
            shifts=inst.shifts,
            planning_days=inst.planning_days,
            emergency_or_id=inst.emergency_or_id,
        )
        grown = solve_exact(bigger, FAST)
        assert compare_lex(grown.objective, base.objective) >= 0
        checked += 1


def test_confidence_scaling_preserves_optimal_pattern():
    rng = random.Random(42)
    checked = 0
    while checked < 10:
        inst = random_instance(rng, max_regs=6, max_cells=3)
        try:
            s1 = solve_exact(inst, FAST)
        except InfeasibleInstanceError:
            continue
        s3 = solve_exact(inst, FAST, confidence_scale=3)
        assert schedule_pattern(s1) == schedule_pattern(s3)
        assert s3.objective.max_cell_confidence == 3 * s1.objective.max_cell_confidence
        assert s3.objective.confidence_spread == 3 * s1.objective.confidence_spread
        checked += 1


def test_node_limit_yields_incomplete_search_with_incumbent():
    rng = random.Random(3)
    inst = random_instance(rng, max_regs=9, max_cells=4)
    with pytest.raises(IncompleteSearchError) as err:
        solve_exact(inst, SolveLimits(time_budget_s=10.0, node_limit=3))
    # a node limit of 3 cannot even reach the first leaf here
    assert err.value.incumbent is None or is_feasible(err.value.incumbent, inst) == []


# -- solve_heuristic -----------------------------------------------------------


H_FAST = SolveLimits(time_budget_s=5.0, max_restarts=8, seed=0)


def test_zero_registrations_give_empty_schedule():
    inst = instance([], [("R1", "GEN", "S1", 0)], {"S1": 10})
    s = solve_heuristic(inst, H_FAST)
    assert s.assignments == ()
    assert s.objective.as_tuple() == (0, 0, 0, 0, 0, 0)


def test_perfect_packing_of_all_p1():
    # 2 cells of 10, four p1 registrations sized to fill both exactly
    inst = instance(
        [reg("a", 1, duration=6), reg("b", 1, duration=4), reg("c", 1, duration=7), reg("d", 1, duration=3)],
        [("R1", "GEN", "S1", 0), ("R2", "GEN", "S2", 0)],
        {"S1": 10, "S2": 10},
    )
    s = solve_heuristic(inst, H_FAST)
    assert s.assigned_ids() == {"a", "b", "c", "d"}
    assert is_feasible(s, inst) == []


def test_heuristic_never_beats_exact_and_often_matches():
    rng = random.Random(99)
    total = matched = 0
    for _ in range(60):
        inst = random_instance(rng, max_regs=8, max_cells=4)
        try:
            best = solve_exact(inst, FAST)
        except InfeasibleInstanceError:
            with pytest.raises(InfeasibleInstanceError):
                solve_heuristic(inst, H_FAST)
            continue
        h = solve_heuristic(inst, H_FAST)
        assert is_feasible(h, inst) == []
        assert compare_lex(h.objective, best.objective) >= 0
        total += 1
        matched += h.objective == best.objective
    assert matched / total >= 0.8


def test_heuristic_deterministic_with_bounded_restarts():
    rng = random.Random(17)
    inst = random_instance(rng, max_regs=9, max_cells=4)
    limits = SolveLimits(time_budget_s=5.0, max_restarts=6, seed=21)
    try:
        a = solve_heuristic(inst, limits)
        b = solve_heuristic(inst, limits)
    except InfeasibleInstanceError:
        return
    assert a == b


def test_heuristic_threads_match_sequential():
    rng = random.Random(29)
    for _ in range(5):
        inst = random_instance(rng, max_regs=8, max_cells=4, p1_weight=0.0)
        limits1 = SolveLimits(time_budget_s=5.0, max_restarts=6, seed=3, threads=1)
        limits4 = SolveLimits(time_budget_s=5.0, max_restarts=6, seed=3, threads=4)
        assert solve_heuristic(inst, limits1) == solve_heuristic(inst, limits4)


# -- file round trip ----------------------------------------------------------


def test_schedule_csv_round_trip(tmp_path):
    inst = single_cell_instance([reg("r1", 1, duration=4), reg("r2", 2, duration=4)], capacity=10)
    s = solve_exact(inst, FAST)
    path = tmp_path / "schedule.csv"
    write_schedule_csv(s, path)
    assert read_schedule_csv(path) == s.assignments

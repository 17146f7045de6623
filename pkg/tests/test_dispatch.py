import random
from fractions import Fraction

from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import brute_force_optimum, des_schedule, random_instance
from shopsearch import (
    Instance,
    evaluate,
    fdd,
    fdd_mwkr_schedule,
    generate_instance,
    lower_bound,
    mwkr,
)


class TestPriorityTerms:
    def test_fdd_is_prefix_sum_through_op(self):
        inst = generate_instance(4, 5, seed=1)
        for i in range(4):
            for k in range(5):
                assert fdd(inst, i, k) == sum(inst.proc_time[i][: k + 1])

    def test_mwkr_is_suffix_sum_from_op(self):
        inst = generate_instance(4, 5, seed=1)
        for i in range(4):
            for k in range(5):
                assert mwkr(inst, i, k) == sum(inst.proc_time[i][k:])

    def test_first_op_ratio_uses_full_work(self):
        inst = generate_instance(3, 3, seed=2)
        i = 1
        assert fdd(inst, i, 0) == inst.proc_time[i][0]
        assert mwkr(inst, i, 0) == sum(inst.proc_time[i])

    def test_ratio_comparison_matches_fractions(self):
        # integer cross-multiplication must agree with exact rationals
        rng = random.Random(3)
        inst = generate_instance(6, 4, seed=3)
        for _ in range(200):
            a, b = rng.randrange(6), rng.randrange(6)
            ka, kb = rng.randrange(4), rng.randrange(4)
            lhs = fdd(inst, a, ka) * mwkr(inst, b, kb) < fdd(inst, b, kb) * mwkr(inst, a, ka)
            rhs = Fraction(fdd(inst, a, ka), mwkr(inst, a, ka)) < Fraction(
                fdd(inst, b, kb), mwkr(inst, b, kb)
            )
            assert lhs == rhs


class TestDispatchSchedule:
    def test_schedule_is_feasible_and_complete(self):
        rng = random.Random(5)
        for _ in range(100):
            inst = random_instance(rng)
            sol = fdd_mwkr_schedule(inst)
            assert sorted(sol.machine_seq[0]) == list(range(inst.num_jobs))
            oracle = des_schedule(inst, sol.machine_seq)
            assert oracle is not None
            assert oracle[1] == sol.makespan

    def test_deterministic(self):
        inst = generate_instance(8, 6, seed=11)
        assert fdd_mwkr_schedule(inst) == fdd_mwkr_schedule(inst)

    def test_two_by_two_hand_case(self):
        # equal durations: job 0 dispatches first on ties, both jobs overlap
        inst = Instance(2, 2, ((5, 5), (5, 5)), ((0, 1), (1, 0)))
        sol = fdd_mwkr_schedule(inst)
        assert sol.makespan == 10
        assert sol.machine_seq == ((0, 1), (1, 0))

    def test_single_job(self):
        inst = Instance(1, 3, ((2, 3, 4),), ((2, 0, 1),))
        sol = fdd_mwkr_schedule(inst)
        assert sol.makespan == 9

    def test_non_delay_no_avoidable_idle(self):
        # whenever an op starts, its machine was not left idle while the op
        # was already available
        rng = random.Random(9)
        for _ in range(50):
            inst = random_instance(rng)
            sol = fdd_mwkr_schedule(inst)
            for q in range(inst.num_machines):
                row = sol.machine_seq[q]
                prev_finish = 0
                for pos, i in enumerate(row):
                    k = inst.machine_slot[i][q]
                    start = sol.start_time[i][k]
                    job_ready = (
                        sol.start_time[i][k - 1] + inst.proc_time[i][k - 1]
                        if k > 0
                        else 0
                    )
                    assert start == max(prev_finish, job_ready)
                    prev_finish = start + inst.proc_time[i][k]


class TestOptimalitySandwich:
    def test_three_by_three_sample(self):
        rng = random.Random(42)
        for _ in range(25):
            inst = generate_instance(3, 3, seed=rng.randrange(2**30))
            optimum = brute_force_optimum(inst)
            dispatch = fdd_mwkr_schedule(inst).makespan
            assert lower_bound(inst) <= optimum <= dispatch

    def test_two_by_two_exhaustive(self):
        rng = random.Random(43)
        for _ in range(25):
            inst = generate_instance(2, 2, seed=rng.randrange(2**30))
            optimum = brute_force_optimum(inst)
            assert lower_bound(inst) <= optimum <= fdd_mwkr_schedule(inst).makespan


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**31))
def test_dispatch_matches_evaluate_of_own_sequences(seed):
    rng = random.Random(seed)
    inst = random_instance(rng)
    sol = fdd_mwkr_schedule(inst)
    assert evaluate(inst, sol.machine_seq) == sol

import random

import pytest
from scipy import stats

from shopsearch import (
    ActionSet,
    ActRequest,
    ContextWindow,
    EngineConfig,
    GreedyPolicy,
    OperatorId,
    RandomPolicy,
    action_frequencies,
    finalize,
    generate_instance,
    run_episode,
    rtg_prior,
    sweep_factors,
)
from test_trajectories import fv, make_trajectory


def request_at(step, cur_makespan, prev_makespan=None, action_set=ActionSet.ANP, k=5):
    """Build an act request whose window encodes the last-step comparison."""
    past = []
    if prev_makespan is not None:
        past = [(10, fv(step=step - 1, cur=prev_makespan), 1)]
    current = (8, fv(step=step, cur=cur_makespan))
    window = ContextWindow.build(past, current, k)
    return ActRequest(
        step=step, rtg=8, features=current[1], window=window, action_set=action_set
    )


class TestGreedyPolicy:
    def test_accepts_improvement(self):
        action = GreedyPolicy().act(request_at(3, cur_makespan=90, prev_makespan=100))
        assert action == 1  # CT, accept

    def test_rejects_worsening(self):
        action = GreedyPolicy().act(request_at(3, cur_makespan=100, prev_makespan=90))
        assert action == 0  # CT, reject

    def test_rejects_plateau(self):
        action = GreedyPolicy().act(request_at(3, cur_makespan=90, prev_makespan=90))
        assert action == 0

    def test_accepts_at_step_zero(self):
        action = GreedyPolicy().act(request_at(0, cur_makespan=100))
        assert action == 1

    def test_ct_only_ids_on_any_set(self):
        for action_set in (ActionSet.A, ActionSet.AN, ActionSet.ANP):
            ids = {
                GreedyPolicy().act(
                    request_at(3, cur_makespan, 95, action_set=action_set)
                )
                for cur_makespan in (90, 100)
            }
            assert ids == {0, 1}

    def test_fixed_operator_offsets_ids(self):
        action = GreedyPolicy(operator=OperatorId.CEI).act(
            request_at(2, cur_makespan=80, prev_makespan=100)
        )
        assert action == 2 * 3 + 1

    def test_round_robin_cycles_neighborhood_operators(self):
        policy = GreedyPolicy(operator=None)
        ops = [
            policy.act(request_at(step, 100, 90)) >> 1
            for step in range(8)
        ]
        assert ops == [0, 1, 2, 3, 0, 1, 2, 3]

    def test_round_robin_never_perturbs(self):
        policy = GreedyPolicy(operator=None)
        for step in range(40):
            action = policy.act(request_at(step, 100, 90, action_set=ActionSet.ANP))
            assert (action >> 1) != 4


class TestRandomPolicy:
    def test_ids_in_range(self):
        policy = RandomPolicy(seed=1)
        for action_set in (ActionSet.A, ActionSet.AN, ActionSet.ANP):
            for step in range(200):
                action = policy.act(request_at(step, 100, action_set=action_set))
                assert 0 <= action < action_set.action_count

    def test_reproducible(self):
        a = [RandomPolicy(seed=5).act(request_at(t, 100)) for t in range(50)]
        b = [RandomPolicy(seed=5).act(request_at(t, 100)) for t in range(50)]
        assert a == b

    def test_uniform_by_chi_square(self):
        policy = RandomPolicy(seed=7)
        req = request_at(0, 100)
        counts = [0] * 10
        for _ in range(100_000):
            counts[policy.act(req)] += 1
        result = stats.chisquare(counts)
        assert result.pvalue > 1e-3


class TestActionFrequencies:
    def test_counts_sum_to_total(self):
        records = finalize(make_trajectory("a", [1] * 40))
        counts = action_frequencies(records)
        assert sum(counts) == 40

    def test_single_action_policy_single_bin(self):
        counts = action_frequencies([3] * 25)
        assert counts[3] == 25
        assert sum(counts) == 25

    def test_empty_is_all_zero(self):
        assert action_frequencies([]) == [0] * 10
        assert action_frequencies([], ActionSet.AN) == [0] * 8

    def test_near_uniform_under_random_policy(self):
        rng = random.Random(11)
        actions = [rng.randrange(10) for _ in range(100_000)]
        counts = action_frequencies(actions)
        assert stats.chisquare(counts).pvalue > 1e-3

    def test_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            action_frequencies([8], ActionSet.AN)


class TestSweepFactors:
    def test_default_range(self):
        factors = sweep_factors()
        assert len(factors) == 35
        assert factors[:3] == [0.05, 0.1, 0.15]
        assert factors[-1] == 1.75

    def test_custom_range(self):
        assert sweep_factors(0.5, 1.0, 0.25) == [0.5, 0.75, 1.0]

    def test_rejects_bad_range(self):
        with pytest.raises(ValueError):
            sweep_factors(0.5, 0.1, 0.05)


class TestRtgTelescoping:
    def test_prior_minus_rewards_equals_final_rtg(self):
        rng = random.Random(13)
        for _ in range(8):
            inst = generate_instance(6, 5, seed=rng.randrange(2**30))
            config = EngineConfig(episode_len=50, seed=rng.randrange(100))
            records, _ = run_episode(inst, RandomPolicy(seed=rng.randrange(100)), config)
            from shopsearch import SearchEnv

            env = SearchEnv(inst, config)
            state, _ = env.reset()
            prior = state.rtg
            for rec in records:
                state, _, _, _ = env.step(rec.action)
            assert prior == rtg_prior(
                records[0].features.current_makespan, env.lower_bound, 1.0
            )
            assert state.rtg == prior - sum(r.reward for r in records)

    def test_prior_is_optimistic_upper_bound_on_gap_closure(self):
        # with factor 1.0 the prior never understates the achievable
        # improvement: m_lb <= m_opt implies m_init - m_lb >= m_init - m_opt
        from conftest import brute_force_optimum
        from shopsearch import fdd_mwkr_schedule, lower_bound

        rng = random.Random(17)
        for _ in range(10):
            inst = generate_instance(3, 3, seed=rng.randrange(2**30))
            m_init = fdd_mwkr_schedule(inst).makespan
            prior = rtg_prior(m_init, lower_bound(inst), 1.0)
            assert prior >= m_init - brute_force_optimum(inst)

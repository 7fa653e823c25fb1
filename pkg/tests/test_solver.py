import itertools

import pytest
from hypothesis import given, settings, strategies as st

from oracles import best_vs_fixed_sequence, expected_diff_uniform_vs_uniform, strategy_value_set
from tianji.game import HorseSet
from tianji.solver import (
    BestResponseSolver,
    FastestFirstPolicy,
    FunctionPolicy,
    SlowestFirstPolicy,
    UniformPolicy,
    best_response_policy,
    best_response_value,
    expected_utility,
    exploitability,
    q_values,
    reachable_state_pairs,
    stage_payoff,
)

H = HorseSet.of


@pytest.mark.parametrize("a, b, expected", [(5, 3, 1.0), (4, 4, 0.0), (2, 6, -1.0)])
def test_stage_payoff(a, b, expected):
    assert stage_payoff(a, b) == expected


@pytest.mark.parametrize("own, opp", [(range(1, 8), range(1, 8)), ([1, 2], [1, 2]), ([1], [1])])
def test_best_response_value_vs_uniform_is_zero(own, opp):
    assert best_response_value(UniformPolicy(), H(own), H(opp)) == pytest.approx(0.0, abs=1e-9)


def test_mismatched_sizes_rejected():
    with pytest.raises(ValueError):
        best_response_value(UniformPolicy(), H([1, 2]), H([1]))


# expected values from hand enumeration over the opponent's two equiprobable orders
@pytest.mark.parametrize("own, opp, expected", [
    ([1, 2], [2, 3], {1: -1.5, 2: -1.5}),
    ([1, 2], [1, 3], {1: -0.5, 2: -0.5}),
    ([1], [2], {1: -1.0}),
])
def test_q_values(own, opp, expected):
    q = q_values(UniformPolicy(), H(own), H(opp))
    assert q.keys() == expected.keys()
    for a in q:
        assert q[a] == pytest.approx(expected[a], abs=1e-12)


def test_best_response_to_fastest_first_sacrifices_slowest():
    br = best_response_policy(FastestFirstPolicy())
    full = HorseSet.full(7)
    assert br.action(full, full) == 1
    assert br.distribution(full, full) == {1: 1.0}


def test_best_response_tie_break_vs_uniform():
    br = best_response_policy(UniformPolicy())
    for own, opp in [(HorseSet.full(7), HorseSet.full(7)), (H([3, 5, 6]), H([1, 2, 7]))]:
        assert br.action(own, opp) == own.min()
    assert br.action(H([1]), H([1])) == 1


def test_exploitability_examples():
    assert exploitability(UniformPolicy(), 7) == pytest.approx(0.0, abs=1e-9)
    assert exploitability(FastestFirstPolicy(), 7) == 5.0
    for policy in (UniformPolicy(), FastestFirstPolicy(), SlowestFirstPolicy()):
        assert exploitability(policy, 1) == 0.0


def test_exploitability_matches_permutation_brute_force():
    for n in range(1, 8):
        ff = tuple(range(n, 0, -1))
        best, _ = best_vs_fixed_sequence(ff)
        assert exploitability(FastestFirstPolicy(), n) == best
        best_sf, _ = best_vs_fixed_sequence(tuple(range(1, n + 1)))
        assert exploitability(SlowestFirstPolicy(), n) == best_sf


def test_expected_utility_examples():
    assert expected_utility(UniformPolicy(), UniformPolicy(), 7) == pytest.approx(0.0, abs=1e-9)
    assert expected_utility(FastestFirstPolicy(), FastestFirstPolicy(), 7) == 0.0
    br = best_response_policy(FastestFirstPolicy())
    assert expected_utility(br, FastestFirstPolicy(), 7) == pytest.approx(5.0, abs=1e-12)
    assert expected_utility(br, FastestFirstPolicy(), 7) == exploitability(FastestFirstPolicy(), 7)


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_expected_utility_uniform_matches_enumeration(n):
    assert expected_utility(UniformPolicy(), UniformPolicy(), n) == pytest.approx(
        float(expected_diff_uniform_vs_uniform(n)), abs=1e-12)


def test_expected_utility_antisymmetric():
    policies = [UniformPolicy(), FastestFirstPolicy(), SlowestFirstPolicy(),
                best_response_policy(FastestFirstPolicy())]
    for p, q in itertools.product(policies, repeat=2):
        for n in (3, 7):
            assert expected_utility(p, q, n) == pytest.approx(-expected_utility(q, p, n), abs=1e-9)


def test_equilibrium_certificate_all_n():
    for n in range(1, 9):
        assert abs(exploitability(UniformPolicy(), n)) < 1e-9


def test_action_independence_n7():
    solver = BestResponseSolver(UniformPolicy())
    for own, opp in reachable_state_pairs(7):
        q = solver.q_values(own, opp)
        if q:
            assert max(q.values()) - min(q.values()) < 1e-9


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_walker_oracle_every_counter_strategy_scores_zero(n):
    full = tuple(range(1, n + 1))
    values, count = strategy_value_set(full, full)
    assert values == {0}
    assert count == {1: 1, 2: 2, 3: 24, 4: 1327104}[n]


@settings(max_examples=60, deadline=None)
@given(st.sets(st.integers(1, 7), min_size=1))
def test_order_isomorphism(speeds):
    s = H(speeds)
    assert abs(best_response_value(UniformPolicy(), s, s)) < 1e-9


def test_table_size_bound():
    from math import comb

    solver = BestResponseSolver(UniformPolicy())
    full = HorseSet.full(7)
    solver.value(full, full)
    assert len(solver.values) <= sum(comb(7, k) ** 2 for k in range(8)) == 3432


def test_invalid_policy_distribution_is_rejected():
    bad = FunctionPolicy(lambda own, opp: {own.max(): 0.5})
    with pytest.raises(ValueError):
        exploitability(bad, 3)
    outside = FunctionPolicy(lambda own, opp: {99: 1.0})
    with pytest.raises(ValueError):
        exploitability(outside, 3)


def test_value_bounded_by_remaining_stake():
    solver = BestResponseSolver(FastestFirstPolicy())
    full = HorseSet.full(6)
    solver.value(full, full)
    for (own, _), v in solver.values.items():
        assert abs(v) <= bin(own).count("1")

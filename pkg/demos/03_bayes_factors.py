"""
How much does a player use its random suggestion?
=================================================

Each round a player chooses among m horses. Following the suggestion is
evidence for deliberate randomization; ignoring it is evidence for an own
strategy. The per-tournament log Bayes factor sums that evidence.
"""

import math

from tianji.analysis import (
    BayesParams,
    ChoiceObservation,
    expected_log_bf_independent,
    log_bayes_factor,
    round_contribution,
)

params = BayesParams(eta=0.4)
print(" m   follow   ignore")
for m in range(7, 0, -1):
    ignore = round_contribution(m, False, params) if m > 1 else float("nan")
    print(f"{m:2d}  {round_contribution(m, True, params):+.4f}  {ignore:+.4f}")


def tournament(pattern):
    return [ChoiceObservation(m, hit) for m, hit in zip(range(7, 0, -1), pattern)]


print("always follows:", round(log_bayes_factor(tournament([True] * 7), params), 4))
print("never follows: ", round(log_bayes_factor(tournament([False] * 6 + [True]), params), 4))
print("independent uniform player, expected:", round(expected_log_bf_independent(7, params), 4))

# Sensitivity to eta: at eta = 1 the two hypotheses coincide.
for eta in (0.1, 0.4, 0.7, 1.0):
    v = log_bayes_factor(tournament([True] * 7), BayesParams(eta))
    print(f"eta={eta}: all-follow log BF {v:+.3f} (factor {math.exp(v):.1f})")

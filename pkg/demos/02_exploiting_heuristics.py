"""
Predictable play gets punished
==============================

A player who always sends the fastest horse first is easy to beat: sacrifice
the slowest horse against it, then win every remaining round by one step.
"""

from tianji.agents import BestResponseAgent, ExploiterAgent, FastestFirstAgent
from tianji.game import GameConfig, HorseSet
from tianji.harness import play_tournament
from tianji.seeding import SuggestionStream
from tianji.solver import (
    FastestFirstPolicy,
    SlowestFirstPolicy,
    UniformPolicy,
    best_response_policy,
    exploitability,
)

for policy in (UniformPolicy(), FastestFirstPolicy(), SlowestFirstPolicy()):
    print(f"exploitability of {policy.name:>13}: {exploitability(policy, 7):+.3f}")

br = best_response_policy(FastestFirstPolicy())
print("best opening against fastest-first:", br.action(HorseSet.full(7), HorseSet.full(7)))

game, stream = GameConfig(7), SuggestionStream(0)
result = play_tournament(game, BestResponseAgent("fastest-first"), FastestFirstAgent(), stream, "demo", 1, 1)
print("tuned best response vs fastest-first:", result.score_a, "to", result.score_b)
print("its moves:", [r.choice_a for r in result.history])

# An exploiter starts out knowing nothing and learns between tournaments.
exploiter, ff = ExploiterAgent(), FastestFirstAgent()
for t in range(1, 5):
    r = play_tournament(game, exploiter, ff, stream, "learn", t, 4)
    print(f"tournament {t}: exploiter {r.score_a:g} - fastest-first {r.score_b:g}")

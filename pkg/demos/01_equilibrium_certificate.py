"""
Uniform play is an equilibrium
===============================

Solve the best-response Bellman recursion against an opponent that picks
uniformly among its remaining horses. If no counter-strategy can earn a
positive expected score difference, uniform play cannot be exploited.
"""

from tianji.game import HorseSet
from tianji.solver import BestResponseSolver, UniformPolicy, reachable_state_pairs

# Best-response value from the opening position, for every game size up to 8.
for n in range(1, 9):
    full = HorseSet.full(n)
    solver = BestResponseSolver(UniformPolicy())
    print(f"n={n}: best-response value {solver.value(full, full):+.2e}, "
          f"{len(solver.values)} states")

# The stronger statement: every action has the same Q-value in every state,
# so any counter-policy at all scores exactly zero on average.
solver = BestResponseSolver(UniformPolicy())
spread = 0.0
for own, opp in reachable_state_pairs(7):
    q = solver.q_values(own, opp)
    if q:
        spread = max(spread, max(q.values()) - min(q.values()))
print(f"largest Q-value spread over all n=7 states: {spread:.2e}")

# Q-values are not all zero though; they depend on who holds the faster horses.
print("Q-values for own={1,2} vs opp={2,3}:",
      solver.q_values(HorseSet.of([1, 2]), HorseSet.of([2, 3])))

"""Best-response dynamic programming against fixed behavioral policies.

The state of the game from one player's point of view is the pair of remaining
horse sets ``(own, opp)``. Against an opponent policy ``pi(b | opp, own)`` the
best-response value satisfies

    V(own, opp) = max_a sum_b pi(b) * (payoff(a, b) + V(own - a, opp - b))

with ``V(empty, empty) = 0``. Values are expected score differences
(own minus opponent) in points, so the game is exactly zero-sum.
"""

from __future__ import annotations

from typing import Callable, Mapping

from tianji.game import HorseSet

TOL = 1e-12

Distribution = Mapping[int, float]


def stage_payoff(a: int, b: int) -> float:
    """Reward difference of a single round: +1 win, -1 loss, 0 tie."""
    return float((a > b) - (a < b))


class BehavioralPolicy:
    """Maps ``(own, opp)`` remaining sets to a distribution over ``own``."""

    name = "policy"

    def distribution(self, own: HorseSet, opp: HorseSet) -> Distribution:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"


class UniformPolicy(BehavioralPolicy):
    """Maximal-entropy play: uniform over the remaining horses."""

    name = "uniform"

    def distribution(self, own, opp):
        p = 1.0 / len(own)
        return {s: p for s in own}


class FastestFirstPolicy(BehavioralPolicy):
    name = "fastest-first"

    def distribution(self, own, opp):
        return {own.max(): 1.0}


class SlowestFirstPolicy(BehavioralPolicy):
    name = "slowest-first"

    def distribution(self, own, opp):
        return {own.min(): 1.0}


class FunctionPolicy(BehavioralPolicy):
    def __init__(self, fn: Callable[[HorseSet, HorseSet], Distribution], name="custom"):
        self._fn = fn
        self.name = name

    def distribution(self, own, opp):
        return self._fn(own, opp)


NAMED_POLICIES: dict[str, Callable[[], BehavioralPolicy]] = {
    "uniform": UniformPolicy,
    "fastest-first": FastestFirstPolicy,
    "slowest-first": SlowestFirstPolicy,
}


def check_distribution(dist: Distribution, own: HorseSet) -> None:
    if not own:
        raise ValueError("policy queried with empty own set")
    total = 0.0
    for s, p in dist.items():
        if s not in own:
            raise ValueError(f"policy puts mass on {s} outside {own!r}")
        if p < 0:
            raise ValueError(f"negative probability {p} for {s}")
        total += p
    if abs(total - 1.0) > TOL:
        raise ValueError(f"distribution sums to {total}, not 1")


def _check_sizes(own: HorseSet, opp: HorseSet) -> None:
    if len(own) != len(opp):
        raise ValueError(f"mismatched set sizes: |own|={len(own)}, |opp|={len(opp)}")


def _bits(mask: int) -> list[tuple[int, int]]:
    """(speed, bit) pairs of a mask, ascending speed."""
    out = []
    while mask:
        low = mask & -mask
        out.append((low.bit_length(), low))
        mask ^= low
    return out


class BestResponseSolver:
    """Memoized Bellman recursion against one fixed opponent policy.

    The value table is filled lazily and keyed on ``(own.mask, opp.mask)``.
    """

    def __init__(self, opponent: BehavioralPolicy):
        self.opponent = opponent
        self.values: dict[tuple[int, int], float] = {}
        self._opp_dist: dict[tuple[int, int], list[tuple[int, int, float]]] = {}

    def _opponent_moves(self, own_m: int, opp_m: int) -> list[tuple[int, int, float]]:
        key = (own_m, opp_m)
        moves = self._opp_dist.get(key)
        if moves is None:
            own, opp = HorseSet(own_m), HorseSet(opp_m)
            # the opponent sees the world from its own side
            dist = self.opponent.distribution(opp, own)
            check_distribution(dist, opp)
            moves = [(b, 1 << (b - 1), p) for b, p in sorted(dist.items()) if p != 0.0]
            self._opp_dist[key] = moves
        return moves

    def _q(self, own_m: int, opp_m: int) -> dict[int, float]:
        moves = self._opponent_moves(own_m, opp_m)
        value = self._value
        q = {}
        for a, abit in _bits(own_m):
            own_next = own_m ^ abit
            total = 0.0
            for b, bbit, p in moves:
                total += p * (((a > b) - (a < b)) + value(own_next, opp_m ^ bbit))
            q[a] = total
        return q

    def _value(self, own_m: int, opp_m: int) -> float:
        key = (own_m, opp_m)
        v = self.values.get(key)
        if v is None:
            v = max(self._q(own_m, opp_m).values()) if own_m else 0.0
            self.values[key] = v
        return v

    def q_values(self, own: HorseSet, opp: HorseSet) -> dict[int, float]:
        _check_sizes(own, opp)
        if not own:
            return {}
        return self._q(own.mask, opp.mask)

    def value(self, own: HorseSet, opp: HorseSet) -> float:
        _check_sizes(own, opp)
        return self._value(own.mask, opp.mask)

    def best_action(self, own: HorseSet, opp: HorseSet) -> int:
        """Arg-max of the Q-values; ties go to the lowest speed."""
        q = self.q_values(own, opp)
        best = max(q.values())
        # exact ties only; near-ties from rounding are resolved the same way
        return min(a for a, v in q.items() if v >= best - 1e-12)


def best_response_value(opponent: BehavioralPolicy, own: HorseSet, opp: HorseSet) -> float:
    return BestResponseSolver(opponent).value(own, opp)


def q_values(opponent: BehavioralPolicy, own: HorseSet, opp: HorseSet) -> dict[int, float]:
    return BestResponseSolver(opponent).q_values(own, opp)


class BestResponsePolicy(BehavioralPolicy):
    """Deterministic best response to ``opponent``, lowest-speed tie-break."""

    def __init__(self, opponent: BehavioralPolicy):
        self.solver = BestResponseSolver(opponent)
        self.name = f"best-response({opponent.name})"

    def action(self, own: HorseSet, opp: HorseSet) -> int:
        return self.solver.best_action(own, opp)

    def distribution(self, own, opp):
        return {self.action(own, opp): 1.0}


def best_response_policy(opponent: BehavioralPolicy) -> BestResponsePolicy:
    return BestResponsePolicy(opponent)


def exploitability(policy: BehavioralPolicy, n: int) -> float:
    """Best-response value against ``policy`` from the full starting sets."""
    if n < 1:
        raise ValueError("n must be >= 1")
    full = HorseSet.full(n)
    return best_response_value(policy, full, full)


def expected_utility(policy_a: BehavioralPolicy, policy_b: BehavioralPolicy, n: int) -> float:
    """Exact expected score difference (A minus B) when both policies play out a game."""
    if n < 1:
        raise ValueError("n must be >= 1")
    memo: dict[tuple[int, int], float] = {}

    def ev(sa: HorseSet, sb: HorseSet) -> float:
        if not sa:
            return 0.0
        key = (sa.mask, sb.mask)
        if key in memo:
            return memo[key]
        da = policy_a.distribution(sa, sb)
        db = policy_b.distribution(sb, sa)
        check_distribution(da, sa)
        check_distribution(db, sb)
        total = 0.0
        for a, pa in da.items():
            if pa == 0.0:
                continue
            for b, pb in db.items():
                if pb == 0.0:
                    continue
                total += pa * pb * (stage_payoff(a, b) + ev(sa.without(a), sb.without(b)))
        memo[key] = total
        return total

    full = HorseSet.full(n)
    return ev(full, full)


def reachable_state_pairs(n: int):
    """All ``(own, opp)`` pairs of equal size reachable from the full sets."""
    full = HorseSet.full(n).mask
    masks_by_size: dict[int, list[int]] = {}
    for m in range(full + 1):
        masks_by_size.setdefault(bin(m).count("1"), []).append(m)
    for size in range(n, -1, -1):
        for a in masks_by_size[size]:
            for b in masks_by_size[size]:
                yield HorseSet(a), HorseSet(b)

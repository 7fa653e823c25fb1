"""Rules engine for the simultaneous N-horse selection game.

Each player owns horses with speeds 1..N. Every round both players reveal one
unused horse at the same time; the faster horse takes the round's 1.0 point and
a tie splits it. After N rounds the higher total wins.

Scores are kept as integer half-points so that draw detection never depends on
floating-point accumulation. Everything here is immutable.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator

ROUND_REWARD = 1.0


class IllegalMoveError(ValueError):
    """A choice or suggestion is not in the player's remaining set."""

    def __init__(self, player: "Side", speed: int, legal: "HorseSet"):
        self.player = player
        self.speed = speed
        self.legal = legal
        super().__init__(
            f"player {player.value} chose {speed}, legal moves are {sorted(legal)}"
        )


class TournamentFinishedError(RuntimeError):
    pass


class TournamentUnfinishedError(RuntimeError):
    pass


class Side(str, enum.Enum):
    A = "A"
    B = "B"

    @property
    def other(self) -> "Side":
        return Side.B if self is Side.A else Side.A


class Winner(str, enum.Enum):
    A = "A"
    B = "B"
    DRAW = "Draw"


@dataclass(frozen=True, order=True)
class HorseSet:
    """Set of horse speeds stored as a bit field (bit ``s-1`` set for speed ``s``)."""

    mask: int = 0

    @classmethod
    def full(cls, n: int) -> "HorseSet":
        return cls((1 << n) - 1)

    @classmethod
    def of(cls, speeds: Iterable[int]) -> "HorseSet":
        mask = 0
        for s in speeds:
            if s < 1:
                raise ValueError(f"speed must be >= 1, got {s}")
            mask |= 1 << (s - 1)
        return cls(mask)

    def __contains__(self, speed: object) -> bool:
        return isinstance(speed, int) and speed >= 1 and bool(self.mask >> (speed - 1) & 1)

    def __iter__(self) -> Iterator[int]:
        m, s = self.mask, 1
        while m:
            if m & 1:
                yield s
            m >>= 1
            s += 1

    def __len__(self) -> int:
        return bin(self.mask).count("1")

    def __bool__(self) -> bool:
        return self.mask != 0

    def __repr__(self) -> str:
        return "{" + ",".join(map(str, self)) + "}"

    def without(self, speed: int) -> "HorseSet":
        if speed not in self:
            raise KeyError(speed)
        return HorseSet(self.mask & ~(1 << (speed - 1)))

    def max(self) -> int:
        if not self.mask:
            raise ValueError("empty horse set")
        return self.mask.bit_length()

    def min(self) -> int:
        if not self.mask:
            raise ValueError("empty horse set")
        return (self.mask & -self.mask).bit_length()


@dataclass(frozen=True)
class GameConfig:
    n_horses: int = 7
    round_reward: float = ROUND_REWARD

    def __post_init__(self):
        if self.n_horses < 1:
            raise ValueError(f"n_horses must be >= 1, got {self.n_horses}")
        if self.round_reward != ROUND_REWARD:
            raise ValueError("round_reward is fixed at 1.0")


def round_half_points(a: int, b: int) -> tuple[int, int]:
    """Half-point rewards for one round: (2, 0), (0, 2) or (1, 1)."""
    if a > b:
        return 2, 0
    if a < b:
        return 0, 2
    return 1, 1


@dataclass(frozen=True)
class RoundRecord:
    round_index: int
    choice_a: int
    choice_b: int
    suggestion_a: int
    suggestion_b: int
    reward_a: float
    reward_b: float
    fallback_a: bool = False
    fallback_b: bool = False

    @property
    def matched_a(self) -> bool:
        return self.choice_a == self.suggestion_a

    @property
    def matched_b(self) -> bool:
        return self.choice_b == self.suggestion_b

    def choice(self, side: Side) -> int:
        return self.choice_a if side is Side.A else self.choice_b

    def suggestion(self, side: Side) -> int:
        return self.suggestion_a if side is Side.A else self.suggestion_b

    def matched(self, side: Side) -> bool:
        return self.matched_a if side is Side.A else self.matched_b

    def fallback(self, side: Side) -> bool:
        return self.fallback_a if side is Side.A else self.fallback_b

    def reward(self, side: Side) -> float:
        return self.reward_a if side is Side.A else self.reward_b

    def to_dict(self) -> dict:
        return {
            "round_index": self.round_index,
            "choice_a": self.choice_a,
            "choice_b": self.choice_b,
            "suggestion_a": self.suggestion_a,
            "suggestion_b": self.suggestion_b,
            "reward_a": self.reward_a,
            "reward_b": self.reward_b,
            "matched_a": self.matched_a,
            "matched_b": self.matched_b,
            "fallback_a": self.fallback_a,
            "fallback_b": self.fallback_b,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RoundRecord":
        return cls(
            round_index=d["round_index"],
            choice_a=d["choice_a"],
            choice_b=d["choice_b"],
            suggestion_a=d["suggestion_a"],
            suggestion_b=d["suggestion_b"],
            reward_a=d["reward_a"],
            reward_b=d["reward_b"],
            fallback_a=d.get("fallback_a", False),
            fallback_b=d.get("fallback_b", False),
        )


@dataclass(frozen=True)
class TournamentState:
    config: GameConfig
    remaining_a: HorseSet
    remaining_b: HorseSet
    half_points_a: int = 0
    half_points_b: int = 0
    history: tuple[RoundRecord, ...] = field(default=())

    @property
    def score_a(self) -> float:
        return self.half_points_a / 2

    @property
    def score_b(self) -> float:
        return self.half_points_b / 2

    @property
    def round_index(self) -> int:
        """1-based index of the next round to be played."""
        return len(self.history) + 1

    @property
    def finished(self) -> bool:
        return len(self.history) == self.config.n_horses

    def remaining(self, side: Side) -> HorseSet:
        return self.remaining_a if side is Side.A else self.remaining_b


@dataclass(frozen=True)
class TournamentResult:
    score_a: float
    score_b: float
    winner: Winner
    history: tuple[RoundRecord, ...]

    def score(self, side: Side) -> float:
        return self.score_a if side is Side.A else self.score_b


def new_tournament(config: GameConfig) -> TournamentState:
    full = HorseSet.full(config.n_horses)
    return TournamentState(config=config, remaining_a=full, remaining_b=full)


def legal_moves(state: TournamentState, player: Side) -> HorseSet:
    if state.finished:
        raise TournamentFinishedError("tournament is finished; no legal moves")
    return state.remaining(player)


def resolve_round(
    state: TournamentState,
    choice_a: int,
    choice_b: int,
    suggestion_a: int,
    suggestion_b: int,
    *,
    fallback_a: bool = False,
    fallback_b: bool = False,
) -> tuple[TournamentState, RoundRecord]:
    """Play one round. Illegal choices or suggestions raise, they are never repaired."""
    if state.finished:
        raise TournamentFinishedError("tournament is finished")
    for side, speed in ((Side.A, choice_a), (Side.B, choice_b),
                        (Side.A, suggestion_a), (Side.B, suggestion_b)):
        if speed not in state.remaining(side):
            raise IllegalMoveError(side, speed, state.remaining(side))

    ha, hb = round_half_points(choice_a, choice_b)
    record = RoundRecord(
        round_index=state.round_index,
        choice_a=choice_a,
        choice_b=choice_b,
        suggestion_a=suggestion_a,
        suggestion_b=suggestion_b,
        reward_a=ha / 2,
        reward_b=hb / 2,
        fallback_a=fallback_a,
        fallback_b=fallback_b,
    )
    new_state = replace(
        state,
        remaining_a=state.remaining_a.without(choice_a),
        remaining_b=state.remaining_b.without(choice_b),
        half_points_a=state.half_points_a + ha,
        half_points_b=state.half_points_b + hb,
        history=state.history + (record,),
    )
    return new_state, record


def outcome(state: TournamentState) -> TournamentResult:
    if not state.finished:
        raise TournamentUnfinishedError(
            f"{len(state.history)} of {state.config.n_horses} rounds played"
        )
    return TournamentResult(
        score_a=state.score_a,
        score_b=state.score_b,
        winner=winner_of(state.half_points_a, state.half_points_b),
        history=state.history,
    )


def winner_of(score_a: float, score_b: float) -> Winner:
    if score_a > score_b:
        return Winner.A
    if score_b > score_a:
        return Winner.B
    return Winner.DRAW


def replay(config: GameConfig, rounds: Iterable[RoundRecord]) -> TournamentResult:
    """Re-run recorded rounds through the rules and return the recomputed result."""
    state = new_tournament(config)
    for r in rounds:
        state, _ = resolve_round(
            state, r.choice_a, r.choice_b, r.suggestion_a, r.suggestion_b,
            fallback_a=r.fallback_a, fallback_b=r.fallback_b,
        )
    return outcome(state)

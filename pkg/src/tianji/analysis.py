"""Log Bayes factors for suggestion use, and the W / B matrices.

Two hypotheses explain a player's choice among ``m`` legal horses:

* H1 (randomizing): the player takes the system suggestion, except that with
  probability ``eta`` it abandons it for a uniformly drawn horse.
* H2 (own strategy): the suggestion is irrelevant; relative to it the choice
  looks uniform over the ``m`` options.

All logarithms are natural, so factors are in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from tianji.game import RoundRecord, Side, TournamentResult, Winner

DEFAULT_ETA = 0.4


@dataclass(frozen=True)
class BayesParams:
    eta: float = DEFAULT_ETA

    def __post_init__(self):
        if not (0.0 < self.eta <= 1.0):
            raise ValueError(f"eta must lie in (0, 1], got {self.eta}")


@dataclass(frozen=True)
class ChoiceObservation:
    legal_count: int
    matched: bool

    def __post_init__(self):
        if self.legal_count < 1:
            raise ValueError("legal_count must be >= 1")
        if self.legal_count == 1 and not self.matched:
            raise ValueError("with a single legal horse the choice must match the suggestion")


def likelihood_h1(m: int, matched: bool, params: BayesParams = BayesParams()) -> float:
    if m < 1:
        raise ValueError("m must be >= 1")
    if matched:
        return 1.0 - (m - 1) / m * params.eta
    return params.eta / m


def likelihood_h2(m: int) -> float:
    if m < 1:
        raise ValueError("m must be >= 1")
    return 1.0 / m


def round_contribution(m: int, matched: bool, params: BayesParams = BayesParams()) -> float:
    # computed as a single ratio so that m == 1 and eta == 1 give exactly 0.0
    if matched:
        return math.log(m - (m - 1) * params.eta)
    return math.log(params.eta)


def log_bayes_factor(
    observations: Iterable[ChoiceObservation], params: BayesParams = BayesParams()
) -> float:
    """Sum over rounds of ``ln P(choice | H1) - ln P(choice | H2)``."""
    return math.fsum(round_contribution(o.legal_count, o.matched, params) for o in observations)


def observations_for(
    history: Sequence[RoundRecord], side: Side, n_horses: int, exclude_fallbacks: bool = False
) -> list[ChoiceObservation]:
    """Observations of one player's tournament; round ``r`` offers ``n - r + 1`` horses."""
    return [
        ChoiceObservation(n_horses - r.round_index + 1, r.matched(side))
        for r in history
        if not (exclude_fallbacks and r.fallback(side))
    ]


def tournament_log_bf(
    result: TournamentResult,
    side: Side,
    n_horses: int,
    params: BayesParams = BayesParams(),
    exclude_fallbacks: bool = False,
) -> float:
    return log_bayes_factor(observations_for(result.history, side, n_horses, exclude_fallbacks), params)


def expected_log_bf_independent(n_horses: int, params: BayesParams = BayesParams()) -> float:
    """Expected log Bayes factor of a player that draws its own horse uniformly.

    Such a player matches the suggestion with probability ``1/m`` each round.
    """
    total = 0.0
    for m in range(n_horses, 0, -1):
        p = 1.0 / m
        total += p * round_contribution(m, True, params)
        if m > 1:
            total += (1 - p) * round_contribution(m, False, params)
    return total


@dataclass(frozen=True)
class PairingSummary:
    """What one ordered pairing contributes: per-tournament winners and column log BFs."""

    winners: tuple[Winner, ...]
    column_log_bfs: tuple[float, ...]


def aggregate(summary: PairingSummary, k: int) -> tuple[int, float]:
    """W and B cells of one ordered pairing (row plays side A, column plays side B).

    W = column wins - row wins, draws counting for neither side.
    B = mean of the column player's per-tournament log Bayes factors.
    """
    if len(summary.winners) != k or len(summary.column_log_bfs) != k:
        raise ValueError(
            f"expected {k} tournaments, got {len(summary.winners)} results "
            f"and {len(summary.column_log_bfs)} log Bayes factors"
        )
    col = sum(w is Winner.B for w in summary.winners)
    row = sum(w is Winner.A for w in summary.winners)
    return col - row, math.fsum(summary.column_log_bfs) / k


@dataclass
class LabeledMatrix:
    """Square matrix over ordered agent pairs; NaN marks a failed pairing."""

    labels: list[str]
    values: np.ndarray = field(repr=False)
    integer: bool = False

    @classmethod
    def empty(cls, labels: Sequence[str], integer: bool = False) -> "LabeledMatrix":
        n = len(labels)
        return cls(list(labels), np.full((n, n), np.nan), integer)

    def set(self, row: str, col: str, value: float) -> None:
        self.values[self.labels.index(row), self.labels.index(col)] = value

    def get(self, row: str, col: str) -> float:
        return float(self.values[self.labels.index(row), self.labels.index(col)])

    def cell_text(self, i: int, j: int) -> str:
        v = self.values[i, j]
        if np.isnan(v):
            return ""
        if self.integer:
            return str(int(v))
        return repr(float(v))

    def to_csv(self) -> str:
        lines = [",".join([""] + self.labels)]
        for i, label in enumerate(self.labels):
            lines.append(",".join([label] + [self.cell_text(i, j) for j in range(len(self.labels))]))
        return "\n".join(lines) + "\n"

    def to_json(self) -> dict:
        rows = []
        for i in range(len(self.labels)):
            row = []
            for j in range(len(self.labels)):
                v = self.values[i, j]
                row.append(None if np.isnan(v) else (int(v) if self.integer else float(v)))
            rows.append(row)
        return {"labels": self.labels, "rows": "row agent plays side A", "columns":
                "column agent plays side B", "values": rows}

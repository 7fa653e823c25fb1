"""Players that take part in tournaments.

All agents share one interface: :meth:`Agent.decide` receives a
:class:`GameView` (public state plus the agent's own private suggestion) and
returns a :class:`Decision`. Agents that learn across the K tournaments of a
pairing do so in :meth:`Agent.observe_tournament`.
"""

from __future__ import annotations

import sys
import threading
from dataclasses import dataclass, field
from typing import Any, TextIO

import numpy as np

from tianji.game import HorseSet, Side, TournamentResult
from tianji.solver import NAMED_POLICIES, BehavioralPolicy, BestResponsePolicy


@dataclass(frozen=True)
class HistoryEntry:
    round_index: int
    own_choice: int
    opp_choice: int
    own_reward: float
    opp_reward: float


@dataclass(frozen=True)
class GameView:
    """Everything one player may see when choosing a horse.

    Only ``suggestion`` is private; the opponent's suggestion is never part of
    a view.
    """

    own_remaining: HorseSet
    opp_remaining: HorseSet
    own_score: float
    opp_score: float
    public_history: tuple[HistoryEntry, ...]
    suggestion: int
    round_index: int
    tournament_index: int
    n_horses: int
    n_tournaments: int = 1

    def __post_init__(self):
        if self.suggestion not in self.own_remaining:
            raise ValueError(f"suggestion {self.suggestion} not in {self.own_remaining!r}")


@dataclass
class Decision:
    speed: int
    fallback: bool = False
    # ChatExchange records for LLM agents, empty otherwise
    exchanges: list = field(default_factory=list)


class Agent:
    kind = "agent"

    def __init__(self, name: str | None = None):
        self.name = name or self.kind

    def decide(self, view: GameView) -> Decision:
        return Decision(self.choose(view))

    def choose(self, view: GameView) -> int:
        raise NotImplementedError

    def begin_tournament(self, tournament_index: int) -> None:
        pass

    def observe_tournament(self, result: TournamentResult, side: Side) -> None:
        pass

    def __repr__(self):
        return f"{type(self).__name__}(name={self.name!r})"


class UniformAgent(Agent):
    """Always plays the system suggestion."""

    kind = "uniform"

    def choose(self, view):
        return view.suggestion


class FastestFirstAgent(Agent):
    kind = "fastest-first"

    def choose(self, view):
        return view.own_remaining.max()


class IndependentUniformAgent(Agent):
    """Randomizes uniformly with its own generator and ignores the suggestion."""

    kind = "independent-uniform"

    def __init__(self, rng: np.random.Generator | None = None, name=None):
        super().__init__(name)
        self.rng = rng if rng is not None else np.random.default_rng(0)

    def choose(self, view):
        speeds = list(view.own_remaining)
        return speeds[int(self.rng.integers(len(speeds)))]


class BestResponseAgent(Agent):
    """Plays the best response to a fixed opponent policy (uniform by default).

    Against uniform every action is optimal and the lowest-speed tie-break
    makes this agent play slowest-first.
    """

    kind = "best-response"
    _shared: dict[str, BestResponsePolicy] = {}
    _lock = threading.Lock()

    def __init__(self, target: str = "uniform", name=None):
        super().__init__(name)
        if target not in NAMED_POLICIES:
            raise ValueError(f"unknown target policy {target!r}")
        self.target = target
        # value tables never change once filled, so instances share them
        with BestResponseAgent._lock:
            policy = BestResponseAgent._shared.get(target)
            if policy is None:
                policy = BestResponseAgent._shared[target] = BestResponsePolicy(NAMED_POLICIES[target]())
        self.policy = policy

    def choose(self, view):
        return self.policy.action(view.own_remaining, view.opp_remaining)


class OpponentModel(BehavioralPolicy):
    """Stationary, Laplace-smoothed estimate of the opponent's behavior.

    Conditions only on the opponent's own remaining set.
    """

    name = "opponent-model"

    def __init__(self, smoothing: float = 1.0):
        if smoothing <= 0:
            raise ValueError("smoothing must be > 0")
        self.smoothing = smoothing
        self.counts: dict[int, dict[int, int]] = {}

    def record(self, remaining: HorseSet, choice: int) -> None:
        per = self.counts.setdefault(remaining.mask, {})
        per[choice] = per.get(choice, 0) + 1

    def distribution(self, own, opp):
        per = self.counts.get(own.mask, {})
        total = sum(per.values())
        denom = total + self.smoothing * len(own)
        return {s: (per.get(s, 0) + self.smoothing) / denom for s in own}

    def snapshot(self) -> "OpponentModel":
        copy = OpponentModel(self.smoothing)
        copy.counts = {k: dict(v) for k, v in self.counts.items()}
        return copy


class ExploiterAgent(Agent):
    """Learns the opponent's habits across tournaments and best-responds to them.

    The best response is recomputed at the start of every tournament from counts
    pooled over all earlier tournaments of the pairing.
    """

    kind = "exploiter"

    def __init__(self, smoothing: float = 1.0, name=None):
        super().__init__(name)
        self.model = OpponentModel(smoothing)
        self.policy = BestResponsePolicy(self.model.snapshot())

    def begin_tournament(self, tournament_index):
        self.policy = BestResponsePolicy(self.model.snapshot())

    def choose(self, view):
        return self.policy.action(view.own_remaining, view.opp_remaining)

    def observe_tournament(self, result, side):
        opp = side.other
        remaining = HorseSet.full(len(result.history))
        for r in result.history:
            choice = r.choice(opp)
            self.model.record(remaining, choice)
            remaining = remaining.without(choice)


def format_view(view: GameView) -> str:
    lines = [
        f"Tournament {view.tournament_index}/{view.n_tournaments}, "
        f"round {view.round_index}/{view.n_horses}",
        f"Score: you {view.own_score:g}, opponent {view.opp_score:g}",
        f"Your remaining horses: {sorted(view.own_remaining)}",
        f"Opponent remaining horses: {sorted(view.opp_remaining)}",
    ]
    if view.public_history:
        lines.append("History (round: you vs opponent):")
        for h in view.public_history:
            lines.append(f"  {h.round_index}: {h.own_choice} vs {h.opp_choice} "
                         f"({h.own_reward:g} - {h.opp_reward:g})")
    lines.append(f"System random suggestion: {view.suggestion}")
    return "\n".join(lines)


class HumanTerminalAgent(Agent):
    """Asks a person at the terminal; re-prompts until the entry is legal."""

    kind = "human"

    def __init__(self, stdin: TextIO | None = None, stdout: TextIO | None = None, name=None):
        super().__init__(name or "human")
        self.stdin = stdin or sys.stdin
        self.stdout = stdout or sys.stdout

    def choose(self, view):
        print(format_view(view), file=self.stdout)
        legal = sorted(view.own_remaining)
        while True:
            print(f"Choose a horse {legal} (Enter = take the suggestion): ",
                  end="", file=self.stdout, flush=True)
            line = self.stdin.readline()
            if not line:
                raise EOFError("input closed")
            text = line.strip()
            if not text:
                return view.suggestion
            try:
                speed = int(text)
            except ValueError:
                print(f"'{text}' is not a number.", file=self.stdout)
                continue
            if speed in view.own_remaining:
                return speed
            print(f"{speed} is not available.", file=self.stdout)


@dataclass(frozen=True)
class AgentSpec:
    """Roster entry: a unique name, an agent kind and kind-specific settings."""

    name: str
    kind: str
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in AGENT_KINDS:
            raise ValueError(f"unknown agent kind {self.kind!r}; choose from {sorted(AGENT_KINDS)}")
        if self.kind == "llm":
            for key in ("model", "base_url"):
                if key not in self.params:
                    raise ValueError(f"llm agent {self.name!r} needs '{key}'")


AGENT_KINDS = {
    "uniform", "fastest-first", "best-response", "exploiter",
    "independent-uniform", "llm", "human",
}


def build_agent(spec: AgentSpec, *, rng: np.random.Generator | None = None,
                prompt_variant: str = "neutral", llm_options: dict | None = None) -> Agent:
    """Instantiate a fresh agent for one pairing."""
    kind = spec.kind
    if kind == "uniform":
        return UniformAgent(spec.name)
    if kind == "fastest-first":
        return FastestFirstAgent(spec.name)
    if kind == "best-response":
        return BestResponseAgent(spec.params.get("target", "uniform"), name=spec.name)
    if kind == "exploiter":
        return ExploiterAgent(spec.params.get("smoothing", 1.0), name=spec.name)
    if kind == "independent-uniform":
        return IndependentUniformAgent(rng, name=spec.name)
    if kind == "human":
        return HumanTerminalAgent(name=spec.name)
    from tianji.llm import LlmAgent, endpoint_from_params

    variant = spec.params.get("prompt_variant", prompt_variant)
    return LlmAgent(endpoint_from_params(spec.params), variant, name=spec.name,
                    **(llm_options or {}))

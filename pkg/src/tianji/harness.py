"""Round-robin evaluation: every ordered pair of agents plays K tournaments.

The row agent of a pairing always plays side A and the column agent side B.
Each player gets one private random suggestion per round, drawn from a
stream keyed on ``(master_seed, pairing id, tournament, round, side)`` so
results do not depend on roster order or on how pairings are scheduled.
"""

from __future__ import annotations

import json
import logging
import os
import re
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, TextIO

import yaml

from tianji import __version__
from tianji.agents import AgentSpec, Decision, GameView, HistoryEntry, HumanTerminalAgent, build_agent
from tianji.analysis import (
    DEFAULT_ETA,
    BayesParams,
    LabeledMatrix,
    PairingSummary,
    aggregate,
    tournament_log_bf,
)
from tianji.game import (
    GameConfig,
    IllegalMoveError,
    RoundRecord,
    Side,
    TournamentResult,
    TournamentState,
    Winner,
    new_tournament,
    outcome,
    replay,
    resolve_round,
)
from tianji.heatmap import heatmap_svg
from tianji.llm import ChatClient, ConfigurationError, EndpointError, PromptVariant, prompt_hash
from tianji.seeding import SuggestionStream

log = logging.getLogger(__name__)

CONTEXT_POLICY = (
    "each tournament starts a fresh LLM context; the prompt carries a compact "
    "summary of earlier tournaments of the same pairing"
)
_NAME_RE = re.compile(r"^[A-Za-z0-9_.\-]+$")


@dataclass
class RunConfig:
    agents: list[AgentSpec]
    n_horses: int = 7
    tournaments_k: int = 10
    master_seed: int = 0
    prompt_variant: str = "neutral"
    eta: float = DEFAULT_ETA
    output_dir: Path | None = None
    max_concurrent_pairings: int = 1
    max_in_flight: int = 4

    def __post_init__(self):
        if self.n_horses < 1:
            raise ValueError("n_horses must be >= 1")
        if self.tournaments_k < 1:
            raise ValueError("tournaments_k must be >= 1")
        BayesParams(self.eta)
        PromptVariant(self.prompt_variant)
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValueError("master_seed must be an unsigned 64-bit integer")
        names = [a.name for a in self.agents]
        if not names:
            raise ValueError("roster is empty")
        if len(set(names)) != len(names):
            raise ValueError(f"agent names must be unique: {names}")
        for name in names:
            if not _NAME_RE.match(name):
                raise ValueError(f"agent name {name!r} may only use letters, digits, '_', '.', '-'")
        if self.output_dir is not None:
            self.output_dir = Path(self.output_dir)

    @property
    def game(self) -> GameConfig:
        return GameConfig(self.n_horses)

    def to_dict(self) -> dict:
        return {
            "agents": [{"name": a.name, "kind": a.kind, "params": a.params} for a in self.agents],
            "n_horses": self.n_horses,
            "tournaments_k": self.tournaments_k,
            "master_seed": self.master_seed,
            "prompt_variant": self.prompt_variant,
            "eta": self.eta,
            "max_concurrent_pairings": self.max_concurrent_pairings,
            "max_in_flight": self.max_in_flight,
        }


def load_config(path: str | Path, **overrides) -> RunConfig:
    """Read a YAML (or JSON) run configuration; non-None overrides win."""
    with open(path, encoding="utf-8") as f:
        raw = yaml.safe_load(f) or {}
    raw.update({k: v for k, v in overrides.items() if v is not None})
    agents = [AgentSpec(a["name"], a["kind"], dict(a.get("params") or {}))
              for a in raw.pop("agents", [])]
    known = set(RunConfig.__dataclass_fields__) - {"agents"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(agents=agents, **raw)


def pairing_id(row: str, col: str) -> str:
    return f"{row}__vs__{col}"


def make_view(state: TournamentState, side: Side, suggestion: int,
              tournament_index: int, n_tournaments: int) -> GameView:
    """The view handed to ``side``; built only from public state and its own suggestion."""
    other = side.other
    history = tuple(
        HistoryEntry(r.round_index, r.choice(side), r.choice(other), r.reward(side), r.reward(other))
        for r in state.history
    )
    own_hp, opp_hp = ((state.half_points_a, state.half_points_b) if side is Side.A
                      else (state.half_points_b, state.half_points_a))
    return GameView(
        own_remaining=state.remaining(side),
        opp_remaining=state.remaining(other),
        own_score=own_hp / 2,
        opp_score=opp_hp / 2,
        public_history=history,
        suggestion=suggestion,
        round_index=state.round_index,
        tournament_index=tournament_index,
        n_horses=state.config.n_horses,
        n_tournaments=n_tournaments,
    )


@dataclass
class TournamentRecord:
    index: int
    result: TournamentResult
    log_bf_a: float
    log_bf_b: float


@dataclass
class PairingRun:
    pairing_id: str
    row: str
    col: str
    tournaments: list[TournamentRecord] = field(default_factory=list)
    transcript: list[dict] = field(default_factory=list)
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def summary(self) -> PairingSummary:
        return PairingSummary(
            tuple(t.result.winner for t in self.tournaments),
            tuple(t.log_bf_b for t in self.tournaments),
        )


def play_tournament(game: GameConfig, agent_a, agent_b, stream: SuggestionStream, pid: str,
                    t: int, k: int, on_round=None) -> TournamentResult:
    state = new_tournament(game)
    agent_a.begin_tournament(t)
    agent_b.begin_tournament(t)
    while not state.finished:
        r = state.round_index
        sug_a = stream.suggest(pid, t, r, Side.A, state.remaining_a)
        sug_b = stream.suggest(pid, t, r, Side.B, state.remaining_b)
        dec_a: Decision = agent_a.decide(make_view(state, Side.A, sug_a, t, k))
        dec_b: Decision = agent_b.decide(make_view(state, Side.B, sug_b, t, k))
        state, record = resolve_round(state, dec_a.speed, dec_b.speed, sug_a, sug_b,
                                      fallback_a=dec_a.fallback, fallback_b=dec_b.fallback)
        if on_round is not None:
            on_round(record, dec_a, dec_b)
    result = outcome(state)
    agent_a.observe_tournament(result, Side.A)
    agent_b.observe_tournament(result, Side.B)
    return result


def run_pairing(config: RunConfig, row: AgentSpec, col: AgentSpec,
                stream: SuggestionStream, client: ChatClient | None = None) -> PairingRun:
    pid = pairing_id(row.name, col.name)
    run = PairingRun(pid, row.name, col.name)
    game = config.game
    params = BayesParams(config.eta)
    llm_options = {"client": client, "config": game}
    try:
        agent_a = build_agent(row, rng=stream.agent_rng(pid, Side.A),
                              prompt_variant=config.prompt_variant, llm_options=llm_options)
        agent_b = build_agent(col, rng=stream.agent_rng(pid, Side.B),
                              prompt_variant=config.prompt_variant, llm_options=llm_options)
        for t in range(1, config.tournaments_k + 1):
            def on_round(record: RoundRecord, dec_a: Decision, dec_b: Decision, t=t):
                run.transcript.append({
                    "type": "round",
                    "pairing": pid,
                    "tournament": t,
                    **record.to_dict(),
                    "exchanges_a": [e.to_dict() for e in dec_a.exchanges],
                    "exchanges_b": [e.to_dict() for e in dec_b.exchanges],
                })

            result = play_tournament(game, agent_a, agent_b, stream, pid, t,
                                     config.tournaments_k, on_round)
            bf_a = tournament_log_bf(result, Side.A, game.n_horses, params)
            bf_b = tournament_log_bf(result, Side.B, game.n_horses, params)
            run.tournaments.append(TournamentRecord(t, result, bf_a, bf_b))
            run.transcript.append({
                "type": "tournament",
                "pairing": pid,
                "agent_a": row.name,
                "agent_b": col.name,
                "tournament": t,
                "score_a": result.score_a,
                "score_b": result.score_b,
                "winner": result.winner.value,
                "log_bf_a": bf_a,
                "log_bf_b": bf_b,
            })
    except (EndpointError, ConfigurationError, IllegalMoveError) as exc:
        run.error = f"{type(exc).__name__}: {exc}"
        log.error("pairing %s failed: %s", pid, run.error)
    return run


@dataclass
class RunResult:
    config: RunConfig
    w: LabeledMatrix
    b: LabeledMatrix
    pairings: list[PairingRun]

    @property
    def failed(self) -> list[str]:
        return [p.pairing_id for p in self.pairings if p.failed]


def build_matrices(labels: list[str], pairings: list[PairingRun], k: int) -> tuple[LabeledMatrix, LabeledMatrix]:
    w = LabeledMatrix.empty(labels, integer=True)
    b = LabeledMatrix.empty(labels)
    for p in pairings:
        if p.failed:
            continue
        w_cell, b_cell = aggregate(p.summary(), k)
        w.set(p.row, p.col, w_cell)
        b.set(p.row, p.col, b_cell)
    return w, b


def check_output_dir(path: Path, fresh: bool = False) -> None:
    """Create ``path`` and probe it; ``fresh`` also refuses leftovers of an earlier run."""
    if fresh and ((path / "manifest.json").exists() or (path / "transcripts").exists()):
        raise FileExistsError(f"{path} already holds a run; pick another output directory")
    path.mkdir(parents=True, exist_ok=True)
    if not os.access(path, os.W_OK):
        raise PermissionError(f"output directory {path} is not writable")
    probe = path / ".write-probe"
    probe.write_text("")
    probe.unlink()


def run_round_robin(config: RunConfig, client: ChatClient | None = None) -> RunResult:
    """Play all ordered pairs (self-play included) and aggregate W and B."""
    if config.output_dir is not None:
        check_output_dir(config.output_dir, fresh=True)
    stream = SuggestionStream(config.master_seed)
    owns_client = client is None and any(a.kind == "llm" for a in config.agents)
    if owns_client:
        client = ChatClient(max_in_flight=config.max_in_flight)
    jobs = [(row, col) for row in config.agents for col in config.agents]
    try:
        if config.max_concurrent_pairings > 1:
            with ThreadPoolExecutor(config.max_concurrent_pairings) as pool:
                pairings = list(pool.map(lambda rc: run_pairing(config, rc[0], rc[1], stream, client), jobs))
        else:
            pairings = [run_pairing(config, row, col, stream, client) for row, col in jobs]
    finally:
        if owns_client:
            client.close()
    labels = [a.name for a in config.agents]
    w, b = build_matrices(labels, pairings, config.tournaments_k)
    result = RunResult(config, w, b, pairings)
    if config.output_dir is not None:
        emit_reports(result, config.output_dir)
    return result


def _dumps(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_matrices(w: LabeledMatrix, b: LabeledMatrix, out: Path, eta: float, suffix: str = "") -> None:
    (out / "matrices").mkdir(parents=True, exist_ok=True)
    (out / "heatmaps").mkdir(parents=True, exist_ok=True)
    (out / "matrices" / f"w{suffix}.csv").write_text(w.to_csv())
    (out / "matrices" / f"b{suffix}.csv").write_text(b.to_csv())
    (out / "matrices" / f"w{suffix}.json").write_text(json.dumps(w.to_json(), indent=2, sort_keys=True) + "\n")
    (out / "matrices" / f"b{suffix}.json").write_text(
        json.dumps({**b.to_json(), "eta": eta, "units": "nats"}, indent=2, sort_keys=True) + "\n")
    (out / "heatmaps" / f"w{suffix}.svg").write_text(
        heatmap_svg(w, "Net wins of column agent over row agent"))
    (out / "heatmaps" / f"b{suffix}.svg").write_text(
        heatmap_svg(b, f"Mean log Bayes factor of column agent (eta={eta:g})"))


def emit_reports(result: RunResult, out: Path) -> None:
    """Write transcripts, matrices, heatmaps and the manifest under ``out``."""
    out = Path(out)
    check_output_dir(out)
    config = result.config
    tdir = out / "transcripts"
    tdir.mkdir(exist_ok=True)
    for p in result.pairings:
        lines = list(p.transcript)
        if p.failed:
            lines.append({"type": "failure", "pairing": p.pairing_id, "error": p.error})
        (tdir / f"{p.pairing_id}.jsonl").write_text("".join(_dumps(x) + "\n" for x in lines))
    write_matrices(result.w, result.b, out, config.eta)
    manifest = {
        "software": {"package": "tianji", "version": __version__},
        "config": config.to_dict(),
        "master_seed": config.master_seed,
        "eta": config.eta,
        "log_base": "e",
        "prompt_variant": config.prompt_variant,
        "prompt_sha256": prompt_hash(config.prompt_variant),
        "roster": [a.name for a in config.agents],
        "pairings": [
            {"id": p.pairing_id, "row": p.row, "col": p.col, "side_a": p.row, "side_b": p.col,
             "status": "failed" if p.failed else "ok", "error": p.error}
            for p in result.pairings
        ],
        "failed_pairings": result.failed,
        "conventions": {
            "matrix_orientation": "row agent plays side A, column agent plays side B",
            "w_cell": "column wins minus row wins; draws count for neither",
            "b_cell": "mean over K tournaments of the column agent's log Bayes factor",
            "llm_context": CONTEXT_POLICY,
            "fallback_rounds": "counted as matches; flagged fallback_a / fallback_b",
        },
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_transcript(path: Path) -> list[dict]:
    with open(path, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def transcript_tournaments(records: list[dict]) -> list[tuple[dict, list[RoundRecord]]]:
    """Group transcript lines into (tournament record, its rounds)."""
    rounds: dict[int, list[RoundRecord]] = {}
    out = []
    for rec in records:
        if rec["type"] == "round":
            rounds.setdefault(rec["tournament"], []).append(RoundRecord.from_dict(rec))
        elif rec["type"] == "tournament":
            out.append((rec, rounds.pop(rec["tournament"], [])))
    return out


class TranscriptMismatch(AssertionError):
    pass


def verify_transcript(records: list[dict], n_horses: int) -> int:
    """Replay every tournament; raise if recomputed scores differ. Returns the count."""
    game = GameConfig(n_horses)
    count = 0
    for rec, rounds in transcript_tournaments(records):
        res = replay(game, rounds)
        if (res.score_a, res.score_b, res.winner.value) != (rec["score_a"], rec["score_b"], rec["winner"]):
            raise TranscriptMismatch(
                f"{rec['pairing']} tournament {rec['tournament']}: recorded "
                f"{rec['score_a']}-{rec['score_b']}, replay {res.score_a}-{res.score_b}")
        count += 1
    return count


def recompute_report(run_dir: Path, *, exclude_fallbacks: bool = False, eta: float | None = None,
                     out: Path | None = None) -> tuple[LabeledMatrix, LabeledMatrix]:
    """Rebuild W and B from a run directory's transcripts."""
    run_dir = Path(run_dir)
    manifest = json.loads((run_dir / "manifest.json").read_text())
    n = manifest["config"]["n_horses"]
    k = manifest["config"]["tournaments_k"]
    eta = manifest["eta"] if eta is None else eta
    params = BayesParams(eta)
    labels = manifest["roster"]
    w = LabeledMatrix.empty(labels, integer=True)
    b = LabeledMatrix.empty(labels)
    for p in manifest["pairings"]:
        path = run_dir / "transcripts" / f"{p['id']}.jsonl"
        if p["status"] != "ok" or not path.exists():
            continue
        records = read_transcript(path)
        verify_transcript(records, n)
        winners, bfs = [], []
        for rec, rounds in transcript_tournaments(records):
            result = replay(GameConfig(n), rounds)
            winners.append(result.winner)
            bfs.append(tournament_log_bf(result, Side.B, n, params, exclude_fallbacks))
        w_cell, b_cell = aggregate(PairingSummary(tuple(winners), tuple(bfs)), k)
        w.set(p["row"], p["col"], w_cell)
        b.set(p["row"], p["col"], b_cell)
    if out is not None:
        check_output_dir(Path(out))
        write_matrices(w, b, Path(out), eta, "_no_fallbacks" if exclude_fallbacks else "")
    return w, b


class InteractiveAborted(RuntimeError):
    def __init__(self, history: tuple[RoundRecord, ...]):
        super().__init__(f"input ended after {len(history)} completed rounds")
        self.history = history


def play_interactive(config: RunConfig, opponent: AgentSpec, stdin: TextIO | None = None,
                     stdout: TextIO | None = None) -> TournamentResult:
    """One tournament of a person at the terminal (side A) against ``opponent``."""
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    game = config.game
    stream = SuggestionStream(config.master_seed)
    pid = pairing_id("human", opponent.name)
    human = HumanTerminalAgent(stdin, stdout)
    other = build_agent(opponent, rng=stream.agent_rng(pid, Side.B),
                        prompt_variant=config.prompt_variant, llm_options={"config": game})
    played: list[RoundRecord] = []
    try:
        result = play_tournament(game, human, other, stream, pid, 1, 1,
                                 on_round=lambda rec, *_: _report_round(rec, played, stdout))
    except EOFError:
        print("\nInput closed; tournament aborted.", file=stdout)
        raise InteractiveAborted(tuple(played)) from None
    bf = tournament_log_bf(result, Side.A, game.n_horses, BayesParams(config.eta))
    label = {Winner.A: "you win", Winner.B: f"{opponent.name} wins", Winner.DRAW: "draw"}
    print(f"\nFinal score: you {result.score_a:g}, {opponent.name} {result.score_b:g} "
          f"({label[result.winner]})", file=stdout)
    print(f"Your log Bayes factor (eta={config.eta:g}): {bf:+.4f} nats", file=stdout)
    return result


def _report_round(rec: RoundRecord, played: list, stdout: TextIO) -> None:
    played.append(rec)
    print(f"Round {rec.round_index}: you {rec.choice_a} vs opponent {rec.choice_b} "
          f"-> {rec.reward_a:g} : {rec.reward_b:g}\n", file=stdout)

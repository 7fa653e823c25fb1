"""Chat-completion client and the prompt / reply contract for LLM players.

Requests go to an OpenAI-style ``/chat/completions`` endpoint. The temperature
is never sent, so every provider uses its default. Replies must end with a
line ``CHOICE: <speed>``; unusable replies are re-asked and, if they keep
failing, the round falls back to the system suggestion with a flag.
"""

from __future__ import annotations

import enum
import hashlib
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable

import httpx

from tianji.agents import Agent, Decision, GameView
from tianji.game import GameConfig, HorseSet, Side, TournamentResult

log = logging.getLogger(__name__)


class ConfigurationError(RuntimeError):
    pass


class EndpointError(RuntimeError):
    """The endpoint stayed unusable after all retries."""

    def __init__(self, message: str, attempts: int):
        super().__init__(f"{message} (after {attempts} attempts)")
        self.attempts = attempts


class ChoiceError(ValueError):
    kind = "error"


class ParseFailure(ChoiceError):
    kind = "parse_failure"


class IllegalChoice(ChoiceError):
    kind = "illegal_choice"


class PromptVariant(str, enum.Enum):
    FRAMED = "framed"
    NEUTRAL = "neutral"
    HINTED = "hinted"


def rules_template(variant: PromptVariant | str) -> str:
    variant = PromptVariant(variant)
    return resources.files("tianji").joinpath(f"prompts/{variant.value}.txt").read_text("utf-8")


def prompt_hash(variant: PromptVariant | str) -> str:
    """sha256 of the shipped template, cited in run manifests."""
    return hashlib.sha256(rules_template(variant).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ModelEndpoint:
    base_url: str
    model: str
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 60.0
    max_retries: int = 3
    # seconds between consecutive requests to this endpoint
    min_interval: float = 0.0

    def api_key(self) -> str:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise ConfigurationError(f"environment variable {self.api_key_env} is not set")
        return key


def endpoint_from_params(params: dict) -> ModelEndpoint:
    return ModelEndpoint(
        base_url=params["base_url"],
        model=params["model"],
        api_key_env=params.get("api_key_env", "OPENAI_API_KEY"),
        timeout=float(params.get("timeout", 60.0)),
        max_retries=int(params.get("max_retries", 3)),
        min_interval=float(params.get("min_interval", 0.0)),
    )


@dataclass
class ChatExchange:
    request_messages: list[dict]
    response_text: str
    latency: float
    # HTTP attempts spent on this request (1 = no transport retry)
    attempt: int
    # 1-based position in the repair loop
    ask: int = 1
    failure: str | None = None

    def to_dict(self) -> dict:
        return {
            "request_messages": self.request_messages,
            "response_text": self.response_text,
            "latency": self.latency,
            "attempt": self.attempt,
            "ask": self.ask,
            "failure": self.failure,
        }


def render_prompt(variant: PromptVariant | str, view: GameView, config: GameConfig,
                  prior_results: list[str] | None = None) -> list[dict]:
    """System message with the variant's rules, user message with the current state."""
    system = rules_template(variant).format(n=config.n_horses).strip()
    lines = [f"Tournament {view.tournament_index} of {view.n_tournaments}."]
    if prior_results:
        lines.append("Results of earlier tournaments against this opponent:")
        lines.extend(f"- {r}" for r in prior_results)
    lines += [
        f"Round {view.round_index} of {config.n_horses}.",
        f"Score: you {view.own_score:g}, opponent {view.opp_score:g}.",
        f"Your remaining horses: {_fmt_set(view.own_remaining)}",
        f"Opponent's remaining horses: {_fmt_set(view.opp_remaining)}",
    ]
    if view.public_history:
        lines.append("Previous rounds (your horse vs opponent's horse):")
        for h in view.public_history:
            lines.append(f"- Round {h.round_index}: {h.own_choice} vs {h.opp_choice}, "
                         f"points {h.own_reward:g} - {h.opp_reward:g}")
    else:
        lines.append("No rounds played yet in this tournament.")
    lines += [
        f"System random suggestion (optional, visible only to you): {view.suggestion}",
        "Choose one of your remaining horses. You may explain your reasoning, "
        "but the final line must read CHOICE: <speed>",
    ]
    return [{"role": "system", "content": system}, {"role": "user", "content": "\n".join(lines)}]


def _fmt_set(s: HorseSet) -> str:
    return "[" + ", ".join(map(str, s)) + "]"


_CHOICE_RE = re.compile(r"^\s*\**\s*choice\s*:\s*\**\s*(-?\d+)\s*\**\s*$", re.IGNORECASE)


def parse_choice(response_text: str, legal: HorseSet) -> int:
    """Integer from the last ``CHOICE: <n>`` line; raises ParseFailure or IllegalChoice."""
    found = None
    for line in response_text.splitlines():
        m = _CHOICE_RE.match(line)
        if m:
            found = int(m.group(1))
    if found is None:
        raise ParseFailure("no line of the form 'CHOICE: <speed>'")
    if found not in legal:
        raise IllegalChoice(f"{found} is not among the remaining horses {sorted(legal)}")
    return found


class ChatClient:
    """Thin chat-completions client with retry, backoff and rate limiting.

    One client can be shared by all pairings of a run; ``max_in_flight`` bounds
    concurrent requests across the whole run.
    """

    RETRY_STATUS = {429, 500, 502, 503, 504}

    def __init__(self, transport: httpx.BaseTransport | None = None, *,
                 max_in_flight: int = 4, backoff_base: float = 1.0, backoff_cap: float = 30.0,
                 sleep: Callable[[float], None] = time.sleep,
                 clock: Callable[[], float] = time.monotonic):
        self._http = httpx.Client(transport=transport)
        self._in_flight = threading.BoundedSemaphore(max_in_flight)
        self._backoff_base = backoff_base
        self._backoff_cap = backoff_cap
        self._sleep = sleep
        self._clock = clock
        self._last_call: dict[str, float] = {}
        self._rate_lock = threading.Lock()

    def close(self):
        self._http.close()

    def _wait_turn(self, endpoint: ModelEndpoint) -> None:
        if endpoint.min_interval <= 0:
            return
        with self._rate_lock:
            key = f"{endpoint.base_url}|{endpoint.model}"
            now = self._clock()
            ready = self._last_call.get(key, -float("inf")) + endpoint.min_interval
            delay = max(0.0, ready - now)
            self._last_call[key] = now + delay
        if delay:
            self._sleep(delay)

    def request_choice(self, endpoint: ModelEndpoint, messages: list[dict]) -> ChatExchange:
        key = endpoint.api_key()
        url = endpoint.base_url.rstrip("/") + "/chat/completions"
        payload = {"model": endpoint.model, "messages": messages}
        headers = {"Authorization": f"Bearer {key}"}
        attempts = endpoint.max_retries + 1
        last_error = "no attempt made"
        for attempt in range(1, attempts + 1):
            self._wait_turn(endpoint)
            start = self._clock()
            try:
                with self._in_flight:
                    resp = self._http.post(url, json=payload, headers=headers,
                                           timeout=endpoint.timeout)
            except httpx.TransportError as exc:
                last_error = f"transport error: {type(exc).__name__}"
            else:
                if resp.status_code == 200:
                    text = _extract_content(resp)
                    return ChatExchange(messages, text, self._clock() - start, attempt)
                if resp.status_code not in self.RETRY_STATUS:
                    raise EndpointError(f"HTTP {resp.status_code} from {endpoint.model}", attempt)
                last_error = f"HTTP {resp.status_code}"
            if attempt < attempts:
                delay = min(self._backoff_cap, self._backoff_base * 2 ** (attempt - 1))
                log.warning("%s: %s, retrying in %.1fs", endpoint.model, last_error, delay)
                self._sleep(delay)
        raise EndpointError(f"{endpoint.model}: {last_error}", attempts)


def _extract_content(resp: httpx.Response) -> str:
    try:
        content = resp.json()["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise EndpointError(f"malformed chat-completion response: {exc!r}", 1) from exc
    return content or ""


def choose_with_repair(client: ChatClient, endpoint: ModelEndpoint,
                       variant: PromptVariant | str, view: GameView, config: GameConfig,
                       prior_results: list[str] | None = None) -> Decision:
    """Ask the model, re-asking up to ``endpoint.max_retries`` times on unusable replies.

    Returns the suggestion with ``fallback=True`` when no reply is usable.
    Transport failures still raise EndpointError.
    """
    messages = render_prompt(variant, view, config, prior_results)
    exchanges = []
    for ask in range(1, endpoint.max_retries + 2):
        exchange = client.request_choice(endpoint, list(messages))
        exchange.ask = ask
        exchanges.append(exchange)
        try:
            speed = parse_choice(exchange.response_text, view.own_remaining)
        except ChoiceError as exc:
            exchange.failure = exc.kind
            messages = messages + [
                {"role": "assistant", "content": exchange.response_text},
                {"role": "user", "content":
                    f"Your answer could not be used ({exc}). Your remaining horses are "
                    f"{_fmt_set(view.own_remaining)}. End your reply with a final line "
                    f"CHOICE: <speed>"},
            ]
            continue
        return Decision(speed, False, exchanges)
    return Decision(view.suggestion, True, exchanges)


class LlmAgent(Agent):
    kind = "llm"

    def __init__(self, endpoint: ModelEndpoint, variant: PromptVariant | str = "neutral",
                 client: ChatClient | None = None, config: GameConfig | None = None, name=None):
        super().__init__(name or endpoint.model)
        self.endpoint = endpoint
        self.variant = PromptVariant(variant)
        self.client = client or ChatClient()
        self.config = config or GameConfig()
        self.prior_results: list[str] = []

    def decide(self, view):
        return choose_with_repair(self.client, self.endpoint, self.variant, view,
                                  self.config, self.prior_results)

    def choose(self, view):
        return self.decide(view).speed

    def observe_tournament(self, result: TournamentResult, side: Side):
        own, opp = result.score(side), result.score(side.other)
        verdict = "win" if own > opp else "loss" if own < opp else "draw"
        seq_own = ",".join(str(r.choice(side)) for r in result.history)
        seq_opp = ",".join(str(r.choice(side.other)) for r in result.history)
        self.prior_results.append(
            f"Tournament {len(self.prior_results) + 1}: you {own:g}, opponent {opp:g} "
            f"({verdict}); your horses {seq_own}; opponent's horses {seq_opp}"
        )

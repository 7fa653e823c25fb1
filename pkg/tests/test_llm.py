import json

import httpx
import pytest

from tianji.agents import GameView, HistoryEntry
from tianji.game import GameConfig, HorseSet
from tianji.llm import (
    ChatClient,
    ConfigurationError,
    EndpointError,
    IllegalChoice,
    LlmAgent,
    ModelEndpoint,
    ParseFailure,
    PromptVariant,
    choose_with_repair,
    parse_choice,
    prompt_hash,
    render_prompt,
)

LEGAL = HorseSet.full(7)
KEY_ENV = "TIANJI_TEST_KEY"
SECRET = "sk-test-do-not-leak-0xC0FFEE"


def reply(text, status=200):
    return httpx.Response(status, json={"choices": [{"message": {"role": "assistant", "content": text}}]})


class FakeModel:
    """Scripted chat-completions server; records every request body."""

    def __init__(self, *responses):
        self.responses = list(responses)
        self.requests = []

    def __call__(self, request: httpx.Request):
        self.requests.append(request)
        r = self.responses.pop(0) if len(self.responses) > 1 else self.responses[0]
        if isinstance(r, Exception):
            raise r
        if isinstance(r, int):
            return httpx.Response(r, json={"error": "busy"})
        return reply(r)


@pytest.fixture
def key(monkeypatch):
    monkeypatch.setenv(KEY_ENV, SECRET)


def client_for(model, sleeps=None):
    return ChatClient(httpx.MockTransport(model), sleep=(sleeps.append if sleeps is not None else lambda s: None))


def endpoint(**kw):
    return ModelEndpoint(base_url="https://llm.example/v1", model="test-model", api_key_env=KEY_ENV, **kw)


def initial_view(suggestion=4):
    return GameView(LEGAL, LEGAL, 0.0, 0.0, (), suggestion, 1, 1, 7, 10)


class TestParseChoice:
    def test_format(self):
        assert parse_choice("I will randomize.\nCHOICE: 4", LEGAL) == 4

    def test_case_and_whitespace(self):
        assert parse_choice("choice:   6  \n", LEGAL) == 6
        assert parse_choice("**CHOICE: 2**", LEGAL) == 2

    def test_last_matching_line_wins(self):
        assert parse_choice("CHOICE: 3\nactually...\nCHOICE: 5", LEGAL) == 5

    def test_out_of_range(self):
        with pytest.raises(IllegalChoice):
            parse_choice("CHOICE: 9", LEGAL)

    def test_missing_tag(self):
        with pytest.raises(ParseFailure):
            parse_choice("I pick the fastest.", LEGAL)

    def test_failures_are_distinguishable(self):
        assert ParseFailure.kind != IllegalChoice.kind


class TestRenderPrompt:
    def test_hinted_contains_equilibrium_hint(self):
        system = render_prompt("hinted", initial_view(), GameConfig())[0]["content"]
        assert "uniform random selection over your remaining horses is the Nash equilibrium" in system

    def test_neutral_has_no_framing_or_hint(self):
        system = render_prompt("neutral", initial_view(), GameConfig())[0]["content"]
        assert "Tian Ji" not in system
        assert "equilibrium" not in system.lower()
        assert "smartly" not in system

    def test_framed_mentions_story_and_exhortation(self):
        system = render_prompt("framed", initial_view(), GameConfig())[0]["content"]
        assert "Tian Ji" in system and "win smartly" in system

    def test_user_message_contents(self):
        v = GameView(HorseSet.of([1, 2, 4]), HorseSet.of([2, 3, 5]), 2.5, 1.5,
                     (HistoryEntry(1, 7, 7, 0.5, 0.5),), 2, 2, 3, 7, 10)
        user = render_prompt("neutral", v, GameConfig(), ["Tournament 1: you 4, opponent 3 (win)"])[1]["content"]
        assert "Round 2 of 7" in user and "Tournament 3 of 10" in user
        assert "Score: you 2.5, opponent 1.5" in user
        assert "Your remaining horses: [1, 2, 4]" in user
        assert "Opponent's remaining horses: [2, 3, 5]" in user
        assert "Round 1: 7 vs 7" in user
        assert "System random suggestion (optional, visible only to you): 2" in user
        assert "Tournament 1: you 4" in user
        assert user.endswith("the final line must read CHOICE: <speed>")

    def test_initial_round_lists_full_sets(self):
        user = render_prompt("framed", initial_view(), GameConfig())[1]["content"]
        assert "Your remaining horses: [1, 2, 3, 4, 5, 6, 7]" in user
        assert "Opponent's remaining horses: [1, 2, 3, 4, 5, 6, 7]" in user

    def test_prompt_hashes_are_stable_and_distinct(self):
        hashes = {v: prompt_hash(v) for v in PromptVariant}
        assert len(set(hashes.values())) == 3
        assert prompt_hash("neutral") == prompt_hash(PromptVariant.NEUTRAL)


class TestRequestChoice:
    def test_happy_path(self, key):
        model = FakeModel("CHOICE: 3")
        ex = client_for(model).request_choice(endpoint(), [{"role": "user", "content": "hi"}])
        assert ex.attempt == 1 and ex.response_text == "CHOICE: 3"
        body = json.loads(model.requests[0].content)
        assert body == {"model": "test-model", "messages": [{"role": "user", "content": "hi"}]}
        assert "temperature" not in body
        assert model.requests[0].url == "https://llm.example/v1/chat/completions"
        assert model.requests[0].headers["authorization"] == f"Bearer {SECRET}"

    def test_retries_rate_limits_with_backoff(self, key):
        sleeps = []
        model = FakeModel(429, 429, "CHOICE: 1")
        ex = client_for(model, sleeps).request_choice(endpoint(max_retries=3), [])
        assert ex.attempt == 3
        assert sleeps == [1.0, 2.0]

    def test_transport_errors_and_5xx_are_retried(self, key):
        model = FakeModel(httpx.ConnectError("down"), 503, "CHOICE: 1")
        assert client_for(model).request_choice(endpoint(max_retries=2), []).attempt == 3

    def test_exhausted_retries(self, key):
        model = FakeModel(500)
        with pytest.raises(EndpointError) as err:
            client_for(model).request_choice(endpoint(max_retries=2), [])
        assert err.value.attempts == 3
        assert len(model.requests) == 3

    def test_client_error_not_retried(self, key):
        model = FakeModel(401)
        with pytest.raises(EndpointError):
            client_for(model).request_choice(endpoint(max_retries=5), [])
        assert len(model.requests) == 1

    def test_missing_key_makes_no_call(self, monkeypatch):
        monkeypatch.delenv(KEY_ENV, raising=False)
        model = FakeModel("CHOICE: 1")
        with pytest.raises(ConfigurationError):
            client_for(model).request_choice(endpoint(), [])
        assert model.requests == []

    def test_min_interval_spaces_requests(self, key):
        sleeps = []
        clock = iter([0.0, 0.0, 0.0, 0.1, 0.1, 0.1])
        client = ChatClient(httpx.MockTransport(FakeModel("CHOICE: 1")), sleep=sleeps.append,
                            clock=lambda: next(clock))
        ep = endpoint(min_interval=0.5)
        client.request_choice(ep, [])
        client.request_choice(ep, [])
        assert sleeps == [pytest.approx(0.4)]


class TestRepair:
    def test_first_reply_legal(self, key):
        d = choose_with_repair(client_for(FakeModel("CHOICE: 5")), endpoint(), "neutral",
                               initial_view(), GameConfig())
        assert (d.speed, d.fallback) == (5, False)
        assert len(d.exchanges) == 1

    def test_legal_on_second_ask(self, key):
        model = FakeModel("CHOICE: 9", "CHOICE: 2")
        d = choose_with_repair(client_for(model), endpoint(), "neutral", initial_view(), GameConfig())
        assert (d.speed, d.fallback) == (2, False)
        assert d.exchanges[-1].ask == 2
        assert d.exchanges[0].failure == "illegal_choice"
        second = json.loads(model.requests[1].content)["messages"]
        assert second[-1]["role"] == "user" and "[1, 2, 3, 4, 5, 6, 7]" in second[-1]["content"]

    def test_all_replies_unusable_fall_back(self, key):
        model = FakeModel("no idea")
        d = choose_with_repair(client_for(model), endpoint(max_retries=2), "neutral",
                               initial_view(suggestion=6), GameConfig())
        assert (d.speed, d.fallback) == (6, True)
        assert [e.failure for e in d.exchanges] == ["parse_failure"] * 3

    def test_agent_remembers_earlier_tournaments(self, key):
        from tianji.game import Side, TournamentResult, Winner

        model = FakeModel("CHOICE: 1")
        agent = LlmAgent(endpoint(), "hinted", client_for(model))
        agent.observe_tournament(TournamentResult(4.0, 3.0, Winner.A, ()), Side.A)
        agent.decide(initial_view())
        user = json.loads(model.requests[0].content)["messages"][1]["content"]
        assert "Tournament 1: you 4, opponent 3 (win)" in user

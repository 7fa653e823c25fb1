import json
import re

import httpx
import pytest

from tianji.llm import ChatClient

SECRET = "sk-test-do-not-leak-0xC0FFEE"
KEY_ENV = "TIANJI_TEST_KEY"
_SUGGESTION = re.compile(r"System random suggestion \(optional, visible only to you\): (\d+)")
_OWN = re.compile(r"Your remaining horses: \[([\d, ]*)\]")


class PromptReadingModel:
    """Fake chat endpoint that answers from the prompt it receives.

    ``mode`` picks the reply: the suggestion, the fastest own horse, or junk.
    """

    def __init__(self, mode="follow"):
        self.mode = mode
        self.bodies = []

    def __call__(self, request: httpx.Request):
        body = json.loads(request.content)
        self.bodies.append(body)
        user = next(m["content"] for m in body["messages"] if m["role"] == "user")
        suggestion = int(_SUGGESTION.search(user).group(1))
        own = [int(x) for x in _OWN.search(user).group(1).split(",")]
        if self.mode == "follow":
            text = f"I'll take the random option.\nCHOICE: {suggestion}"
        elif self.mode == "fastest":
            text = f"Fastest first.\nCHOICE: {max(own)}"
        elif self.mode == "error":
            return httpx.Response(500, json={"error": "down"})
        else:
            text = "I refuse to answer in the format."
        return httpx.Response(200, json={"choices": [{"message": {"content": text}}]})


@pytest.fixture
def api_key(monkeypatch):
    monkeypatch.setenv(KEY_ENV, SECRET)
    return SECRET


@pytest.fixture
def fake_client():
    def make(model):
        return ChatClient(httpx.MockTransport(model), sleep=lambda s: None)
    return make


def llm_params(name, **kw):
    return {"base_url": f"https://{name}.example/v1", "model": name, "api_key_env": KEY_ENV,
            "max_retries": 1, **kw}


_acceptance_lines = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance.py" in report.nodeid:
        doc = report.nodeid.split("::")[-1]
        _acceptance_lines.append(f"{'PASS' if report.passed else 'FAIL'}  {doc}")


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in _acceptance_lines:
            terminalreporter.write_line(line)

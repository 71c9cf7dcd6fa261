import json

import httpx
import pytest

from fsmscg.gateway import (
    BackendConfig,
    BackendError,
    BackendTimeout,
    BackendUnreachable,
    ConfigError,
    HttpChatBackend,
    NoPayloadFound,
    PromptTooLong,
    ScriptedBackend,
    ScriptedReply,
    ScriptExhausted,
    ScriptLoadError,
    Session,
    extract_code_payload,
    extract_fsm_payload,
    load_script,
    make_backend,
    open_session,
    send,
)
from fsmscg.prompts import build_f2c


def _script(tmp_path, entries):
    path = tmp_path / "script.json"
    path.write_text(json.dumps(entries))
    return path


def _scripted(tmp_path, entries, tag=""):
    cfg = BackendConfig(kind="scripted-mock", script=_script(tmp_path, entries))
    return open_session(cfg, tag=tag)


# ---------------------------------------------------------------- config


@pytest.mark.parametrize(
    "kwargs",
    [
        {"kind": "grpc"},
        {"kind": "scripted-mock"},
        {"kind": "http-chat", "endpoint": "http://x"},
        {"kind": "http-chat", "endpoint": "http://x", "model": "m", "temperature": -1},
        {"kind": "http-chat", "endpoint": "http://x", "model": "m", "max_retries": -1},
    ],
)
def test_bad_backend_config(kwargs):
    with pytest.raises(ConfigError):
        BackendConfig(**kwargs)


# --------------------------------------------------------------- scripted


def test_scripted_turn_matching_and_history(tmp_path):
    s = _scripted(tmp_path, [{"match": 1, "reply": "second"}, {"match": 0, "reply": "first"}])
    assert send(s, "hello") == "first"
    assert send(s, build_f2c()) == "second"
    assert [t.role for t in s.turns] == ["user", "assistant", "user", "assistant"]
    assert s.turns[2].kind == "F2C" and s.turns[0].kind is None
    assert s.transcript()[1] == {"role": "assistant", "kind": None, "text": "first"}


def test_scripted_contains_and_tag(tmp_path):
    entries = [
        {"match": {"tag": "run-b"}, "reply": "for b"},
        {"match": "compile", "reply": "fixed"},
        {"match": None, "reply": "anything"},
    ]
    a = _scripted(tmp_path, entries, tag="run-a")
    assert send(a, "please compile") == "fixed"
    assert send(a, "x") == "anything"
    b = Session(backend=a.backend, config=a.config, tag="run-b")
    assert send(b, "x") == "for b"


def test_each_reply_used_once_per_session(tmp_path):
    s = _scripted(tmp_path, [{"match": None, "reply": "only"}])
    assert send(s, "a") == "only"
    with pytest.raises(ScriptExhausted):
        send(s, "b")
    # a failed send leaves no half turn behind
    assert len(s.turns) == 2


def test_sessions_replay_independently(tmp_path):
    entries = [{"match": None, "reply": "r"}]
    s1 = _scripted(tmp_path, entries)
    s2 = Session(backend=s1.backend, config=s1.config)
    assert send(s1, "x") == send(s2, "x") == "r"


@pytest.mark.parametrize(
    "content",
    ["not json", "{}", '[{"match": 0}]', '[{"match": true, "reply": "x"}]', '[{"match": {"role": "x"}, "reply": "x"}]'],
)
def test_bad_scripts(tmp_path, content):
    path = tmp_path / "s.json"
    path.write_text(content)
    with pytest.raises(ScriptLoadError):
        load_script(path)


def test_missing_script_file(tmp_path):
    with pytest.raises(ScriptLoadError):
        make_backend(BackendConfig(kind="scripted-mock", script=tmp_path / "nope.json"))


def test_scripted_reply_dict_round_trip():
    r = ScriptedReply("x", turn=2, contains="abc")
    assert ScriptedReply.from_dict(r.to_dict()) == r
    assert ScriptedReply.from_dict({"reply": "y"}).to_dict() == {"match": None, "reply": "y"}


def test_prompt_length_guard(tmp_path):
    cfg = BackendConfig(kind="scripted-mock", script=_script(tmp_path, [{"reply": "r"}]), max_prompt_chars=10)
    s = open_session(cfg)
    with pytest.raises(PromptTooLong):
        send(s, "x" * 11)
    assert s.turns == ()


# ------------------------------------------------------------------ http


HTTP_CFG = BackendConfig(kind="http-chat", endpoint="http://llm.test/v1/chat/completions", model="m", system_prompt="sys")


def _ok(text):
    return httpx.Response(200, json={"choices": [{"message": {"role": "assistant", "content": text}}]})


class Recorder:
    def __init__(self, responses):
        self.responses = list(responses)
        self.requests = []

    def __call__(self, request):
        self.requests.append(request)
        item = self.responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def _http(responses, config=HTTP_CFG):
    rec = Recorder(responses)
    sleeps = []
    backend = HttpChatBackend(config, transport=httpx.MockTransport(rec), sleep=sleeps.append)
    return Session(backend=backend, config=config), rec, sleeps


def test_http_sends_history_and_parameters(monkeypatch):
    monkeypatch.setenv("FSMSCG_API_KEY", "sekret")
    s, rec, _ = _http([_ok("one"), _ok("two")])
    assert send(s, "first") == "one"
    assert send(s, "second") == "two"
    body = json.loads(rec.requests[1].content)
    assert body["model"] == "m" and body["temperature"] == 0.0
    assert [m["role"] for m in body["messages"]] == ["system", "user", "assistant", "user"]
    assert body["messages"][-1]["content"] == "second"
    assert rec.requests[0].headers["authorization"] == "Bearer sekret"


def test_http_without_key_sends_no_auth(monkeypatch):
    monkeypatch.delenv("FSMSCG_API_KEY", raising=False)
    s, rec, _ = _http([_ok("x")])
    send(s, "p")
    assert "authorization" not in rec.requests[0].headers


def test_http_retries_with_backoff():
    s, rec, sleeps = _http([httpx.Response(503), httpx.Response(429), _ok("finally")])
    assert send(s, "p") == "finally"
    assert sleeps == [1.0, 4.0]
    assert len(rec.requests) == 3


def test_http_gives_up_after_retries():
    s, rec, sleeps = _http([httpx.Response(500)] * 3)
    with pytest.raises(BackendError) as exc:
        send(s, "p")
    assert exc.value.status == 500
    assert len(rec.requests) == 3 and sleeps == [1.0, 4.0]
    assert s.turns == ()


def test_http_timeout_maps_to_backend_timeout():
    s, _, _ = _http([httpx.ReadTimeout("slow")] * 3)
    with pytest.raises(BackendTimeout):
        send(s, "p")


def test_http_connect_error_is_retried_then_unreachable():
    s, rec, _ = _http([httpx.ConnectError("down")] * 3)
    with pytest.raises(BackendUnreachable):
        send(s, "p")
    assert len(rec.requests) == 3


def test_http_client_error_not_retried():
    s, rec, sleeps = _http([httpx.Response(401, text="bad key")])
    with pytest.raises(BackendError) as exc:
        send(s, "p")
    assert exc.value.status == 401 and sleeps == [] and len(rec.requests) == 1


def test_http_malformed_body():
    s, _, _ = _http([httpx.Response(200, json={"nope": 1})])
    with pytest.raises(BackendError):
        send(s, "p")


def test_http_probe_unreachable():
    def refuse(request):
        raise httpx.ConnectError("refused")

    with pytest.raises(BackendUnreachable):
        make_backend(HTTP_CFG, transport=httpx.MockTransport(refuse))


def test_http_probe_any_status_is_reachable():
    backend = make_backend(HTTP_CFG, transport=httpx.MockTransport(lambda r: httpx.Response(405)))
    assert isinstance(backend, HttpChatBackend)


# ------------------------------------------------------------- extraction

FSM = '{"states": ["A"], "note": "brace } inside"}'


def test_extract_fsm_whole_reply_unchanged():
    reply = "\n" + FSM + "\n"
    assert extract_fsm_payload(reply) == reply.encode()


def test_extract_fsm_from_prose_and_fence():
    reply = f"Here is the FSM {{as requested}}:\n```json\n{FSM}\n```\nDone."
    assert extract_fsm_payload(reply) == FSM.encode()


def test_extract_fsm_nested_objects():
    inner = '{"a": {"b": {"c": "}"}}, "d": [1, {"e": 2}]}'
    assert json.loads(extract_fsm_payload("x " + inner + " y")) == json.loads(inner)


@pytest.mark.parametrize("reply", ["no json here", "{unclosed", '["list", "only"]'])
def test_extract_fsm_none(reply):
    with pytest.raises(NoPayloadFound):
        extract_fsm_payload(reply)


def test_extract_code_fenced():
    reply = "Sure!\n```solidity\npragma solidity 0.8.24;\ncontract A {}\n```\nthanks"
    assert extract_code_payload(reply) == "pragma solidity 0.8.24;\ncontract A {}\n"


def test_extract_code_first_fence_wins():
    reply = "```\ncontract A {}\n```\n```\ncontract B {}\n```"
    assert extract_code_payload(reply) == "contract A {}\n"


def test_extract_code_bare_source():
    reply = "// SPDX-License-Identifier: MIT\npragma solidity 0.8.24;\ncontract A {}\n"
    assert extract_code_payload(reply) == reply


def test_extract_code_none():
    with pytest.raises(NoPayloadFound):
        extract_code_payload("I cannot help with that.")

"""Gateway behavior: request hashing, retries, scripted providers, replay."""

import json

import httpx
import pytest

from iotintel.llmgateway import (
    ChatMessage,
    ChatRequest,
    GatewayConfigError,
    GatewayError,
    HttpChatProvider,
    ProviderProfile,
    ReplayMiss,
    ReplayProvider,
    RetryPolicy,
    ScriptedProvider,
    SequenceProvider,
    TranscriptRecorder,
    ask,
    chat_request,
    extract_json_object,
    load_transcript,
    request_hash,
    strip_code_fence,
)


def make_request(user="hello", system=None, temperature=0.0, max_tokens=None,
                 model="m1"):
    return chat_request(model, user, system=system, temperature=temperature,
                        max_tokens=max_tokens)


class TestRequestValidation:
    def test_rejects_empty_messages(self):
        with pytest.raises(ValueError):
            ChatRequest(model_id="m", messages=())

    def test_rejects_non_user_final_turn(self):
        msgs = (ChatMessage("user", "hi"), ChatMessage("assistant", "yo"))
        with pytest.raises(ValueError):
            ChatRequest(model_id="m", messages=msgs)

    def test_rejects_unknown_role(self):
        with pytest.raises(ValueError):
            ChatMessage("robot", "hi")

    def test_rejects_negative_temperature(self):
        with pytest.raises(ValueError):
            make_request(temperature=-0.1)


class TestRequestHash:
    def test_stable_across_equal_requests(self):
        assert request_hash(make_request()) == request_hash(make_request())

    def test_sensitive_to_model_messages_temperature(self):
        base = request_hash(make_request())
        assert request_hash(make_request(model="m2")) != base
        assert request_hash(make_request(user="other")) != base
        assert request_hash(make_request(system="sys")) != base
        assert request_hash(make_request(temperature=0.5)) != base

    def test_insensitive_to_max_tokens(self):
        assert request_hash(make_request(max_tokens=64)) == request_hash(make_request())

    def test_is_sha256_hex(self):
        digest = request_hash(make_request())
        assert len(digest) == 64
        int(digest, 16)


def make_profile(**overrides):
    defaults = dict(name="test", endpoint="https://api.test/v1/chat/completions",
                    auth_env="TEST_API_KEY", model="m1",
                    retry=RetryPolicy(max_attempts=3, base_backoff_s=0.5))
    defaults.update(overrides)
    return ProviderProfile(**defaults)


def ok_body(text):
    return {"choices": [{"message": {"content": text}}]}


class TestHttpProvider:
    def test_success_returns_content(self, monkeypatch):
        monkeypatch.setenv("TEST_API_KEY", "tok")
        calls = []

        def transport(url, headers, body, timeout):
            calls.append((url, headers, body))
            return 200, ok_body("answer")

        provider = HttpChatProvider(make_profile(), transport=transport, sleep=lambda s: None)
        assert provider.complete(make_request()) == "answer"
        url, headers, body = calls[0]
        assert headers["Authorization"] == "Bearer tok"
        assert body["model"] == "m1"
        assert body["messages"][-1] == {"role": "user", "content": "hello"}
        assert "max_tokens" not in body

    def test_max_tokens_forwarded_when_set(self, monkeypatch):
        monkeypatch.setenv("TEST_API_KEY", "tok")
        seen = {}

        def transport(url, headers, body, timeout):
            seen.update(body)
            return 200, ok_body("x")

        HttpChatProvider(make_profile(), transport=transport).complete(
            make_request(max_tokens=99))
        assert seen["max_tokens"] == 99

    def test_missing_auth_env_raises_config_error(self, monkeypatch):
        monkeypatch.delenv("TEST_API_KEY", raising=False)
        provider = HttpChatProvider(make_profile(), transport=lambda *a: (200, ok_body("x")))
        with pytest.raises(GatewayConfigError):
            provider.complete(make_request())

    def test_retries_on_429_with_doubling_backoff(self, monkeypatch):
        monkeypatch.setenv("TEST_API_KEY", "tok")
        statuses = iter([429, 503])
        sleeps = []

        def transport(url, headers, body, timeout):
            try:
                return next(statuses), {}
            except StopIteration:
                return 200, ok_body("recovered")

        provider = HttpChatProvider(make_profile(), transport=transport,
                                    sleep=sleeps.append)
        assert provider.complete(make_request()) == "recovered"
        assert sleeps == [0.5, 1.0]

    def test_gives_up_after_max_attempts(self, monkeypatch):
        monkeypatch.setenv("TEST_API_KEY", "tok")
        attempts = []

        def transport(url, headers, body, timeout):
            attempts.append(1)
            return 503, {}

        provider = HttpChatProvider(make_profile(), transport=transport,
                                    sleep=lambda s: None)
        with pytest.raises(GatewayError) as err:
            provider.complete(make_request())
        assert len(attempts) == 3
        assert err.value.attempts == 3
        assert err.value.last_status == 503

    def test_non_retryable_status_fails_immediately(self, monkeypatch):
        monkeypatch.setenv("TEST_API_KEY", "tok")
        attempts = []

        def transport(url, headers, body, timeout):
            attempts.append(1)
            return 400, {}

        provider = HttpChatProvider(make_profile(), transport=transport,
                                    sleep=lambda s: None)
        with pytest.raises(GatewayError):
            provider.complete(make_request())
        assert len(attempts) == 1

    def test_transport_errors_are_retried(self, monkeypatch):
        monkeypatch.setenv("TEST_API_KEY", "tok")
        state = {"calls": 0}

        def transport(url, headers, body, timeout):
            state["calls"] += 1
            if state["calls"] < 3:
                raise httpx.ConnectError("boom")
            return 200, ok_body("eventually")

        provider = HttpChatProvider(make_profile(), transport=transport,
                                    sleep=lambda s: None)
        assert provider.complete(make_request()) == "eventually"

    def test_malformed_success_body_is_an_error(self, monkeypatch):
        monkeypatch.setenv("TEST_API_KEY", "tok")
        provider = HttpChatProvider(make_profile(),
                                    transport=lambda *a: (200, {"weird": True}),
                                    sleep=lambda s: None)
        with pytest.raises(GatewayError):
            provider.complete(make_request())


class TestScriptedProviders:
    def test_scripted_serves_by_hash(self):
        req = make_request()
        provider = ScriptedProvider({request_hash(req): "pinned"})
        assert provider.complete(req) == "pinned"

    def test_scripted_miss_without_default_raises(self):
        provider = ScriptedProvider({})
        with pytest.raises(ReplayMiss):
            provider.complete(make_request())

    def test_scripted_default_covers_misses(self):
        provider = ScriptedProvider({}, default="fallback")
        assert provider.complete(make_request()) == "fallback"

    def test_sequence_provider_in_order_then_exhausts(self):
        provider = SequenceProvider(["a", "b"])
        assert provider.complete(make_request(user="1")) == "a"
        assert provider.complete(make_request(user="2")) == "b"
        with pytest.raises(GatewayError):
            provider.complete(make_request(user="3"))
        assert [r.messages[-1].content for r in provider.requests] == ["1", "2", "3"]


class TestRecordReplay:
    def test_round_trip_through_file(self, tmp_path):
        inner = SequenceProvider(["first", "second"])
        recorder = TranscriptRecorder(inner, clock=lambda: 123.0)
        r1, r2 = make_request(user="q1"), make_request(user="q2")
        recorder.complete(r1)
        recorder.complete(r2)
        path = tmp_path / "transcript.jsonl"
        recorder.save(path)

        replayer = ReplayProvider.from_file(path)
        assert replayer.complete(r1) == "first"
        assert replayer.complete(r2) == "second"

    def test_replay_miss_raises_with_hash(self, tmp_path):
        path = tmp_path / "t.jsonl"
        TranscriptRecorder(SequenceProvider([]), clock=lambda: 0.0).save(path)
        replayer = ReplayProvider.from_file(path)
        missing = make_request(user="never recorded")
        with pytest.raises(ReplayMiss) as err:
            replayer.complete(missing)
        assert err.value.request_hash == request_hash(missing)

    def test_transcript_lines_are_json_with_expected_keys(self, tmp_path):
        recorder = TranscriptRecorder(SequenceProvider(["x"]), clock=lambda: 9.0)
        recorder.complete(make_request())
        path = tmp_path / "t.jsonl"
        recorder.save(path)
        line = path.read_text().strip()
        entry = json.loads(line)
        assert set(entry) == {"request_hash", "request", "response", "timestamp", "provider"}
        assert entry["timestamp"] == 9.0
        loaded = load_transcript(path)
        assert loaded[0].response == "x"


class TestOutputPlumbing:
    def test_strip_code_fence_plain_passthrough(self):
        assert strip_code_fence('{"a": 1}') == '{"a": 1}'

    def test_strip_code_fence_json_fence(self):
        text = 'Here you go:\n```json\n{"a": 1}\n```\nDone.'
        assert strip_code_fence(text) == '{"a": 1}'

    def test_extract_json_object_with_surrounding_prose(self):
        assert extract_json_object('Sure! {"k": [1, 2]} hope that helps') == {"k": [1, 2]}

    def test_extract_json_object_rejects_non_object(self):
        with pytest.raises(ValueError):
            extract_json_object("[1, 2, 3]")

    def test_extract_json_object_rejects_garbage(self):
        with pytest.raises(ValueError):
            extract_json_object("no json here at all")

    def test_ask_uses_provider_default_model(self):
        provider = SequenceProvider(["hi"])
        assert ask(provider, "question", system="sys") == "hi"
        req = provider.requests[0]
        assert req.model_id == "scripted"
        assert req.messages[0] == ChatMessage("system", "sys")

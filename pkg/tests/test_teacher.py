import json
import logging
import random

import pytest

from chessdistill.teacher import (
    AuthConfigMissing,
    AuthFailure,
    ProviderError,
    RateLimited,
    RetryPolicy,
    TeacherConfig,
    Timeout,
    batch_distill,
    cache_key,
    complete,
)
from chessdistill.prompts import VARIANTS
from conftest import example_analysis, example_puzzle
from mock_llm import MockLLM, chat_reply, constant
from chessdistill.synthetic import random_puzzles

SECRET = "sk-test-very-secret"


@pytest.fixture(autouse=True)
def api_key(monkeypatch):
    monkeypatch.setenv("TEST_TEACHER_KEY", SECRET)


def cfg_for(server, **kw):
    kw.setdefault("retry", RetryPolicy(max_attempts=3, base_backoff=0.0, jitter=0.0))
    return TeacherConfig(base_url=server.url, model_name="mock-teacher", api_key_env="TEST_TEACHER_KEY", **kw)


def no_sleep(_):
    pass


def test_complete_returns_text_and_usage():
    usage = {"prompt_tokens": 12, "completion_tokens": 34, "total_tokens": 46}
    with MockLLM(constant("hello", usage)) as srv:
        out = complete(cfg_for(srv), "prompt text")
        body, headers = srv.requests[0], srv.headers_seen[0]
    assert (out.text, out.usage) == ("hello", {"prompt_tokens": 12, "completion_tokens": 34})
    assert body == {"model": "mock-teacher", "messages": [{"role": "user", "content": "prompt text"}],
                    "temperature": 0.7, "max_tokens": 2048}
    assert headers["Authorization"] == f"Bearer {SECRET}"


def test_missing_usage_is_null():
    with MockLLM(constant("hi")) as srv:
        out = complete(cfg_for(srv), "p")
    assert out.usage is None and out.completion_tokens is None


def test_retry_after_429():
    def flaky(prompt, body, i):
        return (429, {"error": "slow down"}) if i < 2 else chat_reply("ok")

    sleeps = []
    with MockLLM(flaky) as srv:
        out = complete(cfg_for(srv, retry=RetryPolicy(3, 0.01, 0.5)), "p", sleep=sleeps.append)
        assert srv.calls == 3
    assert out.text == "ok" and out.attempts == 3
    assert len(sleeps) == 2 and sleeps == sorted(sleeps)


def test_auth_failure_not_retried():
    for status in (401, 403):
        with MockLLM(lambda p, b, i: (status, {"error": "bad key"})) as srv:
            with pytest.raises(AuthFailure):
                complete(cfg_for(srv), "p", sleep=no_sleep)
            assert srv.calls == 1


def test_exhausted_retries():
    with MockLLM(lambda p, b, i: (429, {})) as srv:
        with pytest.raises(RateLimited):
            complete(cfg_for(srv), "p", sleep=no_sleep)
        assert srv.calls == 3
    with MockLLM(lambda p, b, i: (503, {})) as srv:
        with pytest.raises(ProviderError):
            complete(cfg_for(srv), "p", sleep=no_sleep)
        assert srv.calls == 3
    with MockLLM(lambda p, b, i: (400, {})) as srv:
        with pytest.raises(ProviderError):
            complete(cfg_for(srv), "p", sleep=no_sleep)
        assert srv.calls == 1
    with MockLLM(lambda p, b, i: (200, {"choices": []})) as srv:
        with pytest.raises(ProviderError):
            complete(cfg_for(srv), "p", sleep=no_sleep)


def test_timeout():
    with MockLLM(constant("late"), delay=0.5) as srv:
        with pytest.raises(Timeout):
            complete(cfg_for(srv, request_timeout=0.1), "p", sleep=no_sleep)


def test_missing_key(monkeypatch):
    monkeypatch.delenv("TEST_TEACHER_KEY")
    with MockLLM(constant("x")) as srv:
        with pytest.raises(AuthConfigMissing):
            batch_distill(cfg_for(srv), [example_puzzle()])
        assert srv.calls == 0


def test_backoff_non_decreasing():
    for seed in range(50):
        for policy in (RetryPolicy(8, 0.5, 0.99), RetryPolicy(10, 1.0, 0.3, max_backoff=5.0)):
            d = policy.delays(random.Random(seed))
            assert d == sorted(d) and len(d) == policy.max_attempts - 1
    with pytest.raises(ValueError):
        RetryPolicy(jitter=1.0)
    with pytest.raises(ValueError):
        RetryPolicy(max_attempts=0)
    with pytest.raises(ValueError):
        TeacherConfig(max_concurrency=0)


def test_cache_hits_skip_network(tmp_path):
    puzzles = random_puzzles(5, seed=4)
    with MockLLM(constant("trace", {"prompt_tokens": 1, "completion_tokens": 2})) as srv:
        cfg = cfg_for(srv, cache_dir=str(tmp_path / "cache"))
        first = batch_distill(cfg, puzzles[:2], variant=VARIANTS["no_pv"])
        assert first.network_calls == 2
        second = batch_distill(cfg, puzzles, variant=VARIANTS["no_pv"])
        assert second.network_calls == 3 and srv.calls == 5
        warm = batch_distill(cfg, puzzles, variant=VARIANTS["no_pv"])
        assert warm.network_calls == 0 and srv.calls == 5
    assert [r.to_dict() for r in warm.records] == [r.to_dict() for r in second.records]
    assert [r.puzzle_id for r in warm.records] == [p.id for p in puzzles]
    for path in (tmp_path / "cache").iterdir():
        assert SECRET not in path.read_text()


def test_cache_key_depends_on_model_and_prompt():
    assert cache_key("a", "p") != cache_key("b", "p") != cache_key("a", "q")


def test_bounded_concurrency():
    puzzles = random_puzzles(100, seed=5)
    with MockLLM(constant("t"), delay=0.02) as srv:
        result = batch_distill(cfg_for(srv, max_concurrency=8), puzzles, variant=VARIANTS["no_pv"])
        assert srv.max_in_flight <= 8
        assert srv.max_in_flight > 1
    assert len(result.records) == 100


def test_isolated_failure(caplog):
    puzzles = random_puzzles(3, seed=6)
    bad_fen = puzzles[1].fen

    def behaviour(prompt, body, i):
        return (500, {}) if bad_fen in prompt else chat_reply("fine")

    caplog.set_level(logging.DEBUG)
    with MockLLM(behaviour) as srv:
        result = batch_distill(cfg_for(srv), puzzles, variant=VARIANTS["no_pv"], sleep=no_sleep)
    assert [r.puzzle_id for r in result.records] == [puzzles[0].id, puzzles[2].id]
    assert [(e.puzzle_id, e.code) for e in result.errors] == [(puzzles[1].id, "ProviderError")]
    assert SECRET not in caplog.text


def test_records_carry_provenance():
    with MockLLM(constant("Trace.\nFINAL_ANSWER: h3h2", {"prompt_tokens": 5, "completion_tokens": 7})) as srv:
        result = batch_distill(cfg_for(srv), [example_puzzle()], {"EX001": example_analysis()})
    [rec] = result.records
    assert (rec.puzzle_id, rec.variant, rec.teacher_model) == ("EX001", "best_move", "mock-teacher")
    assert rec.trace.endswith("FINAL_ANSWER: h3h2") and rec.usage == {"prompt_tokens": 5, "completion_tokens": 7}
    assert "Solution: h3h2" in rec.prompt
    assert json.loads(json.dumps(rec.to_dict()))["prompt"] == rec.prompt


def test_missing_analysis_is_per_item_error():
    puzzle = example_puzzle(themes="fork")
    with MockLLM(constant("x")) as srv:
        result = batch_distill(cfg_for(srv), [puzzle], {}, VARIANTS["best_move"])
        assert srv.calls == 0
    assert [e.code for e in result.errors] == ["MissingAnalysis"]

import json
import subprocess
import sys
import threading
from collections import Counter

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chessdistill.chess import Move
from chessdistill.reward import RewardConfig, RewardOutcome, score, score_batch, serve
from conftest import EXAMPLE_FEN
from reward_props import check_case, run_cases

WORKED = [
    ("…\nFINAL_ANSWER: h3h2", "h3h2", 0.0, 1.0, "exact_match"),
    ("…\nFINAL_ANSWER: h3g2", "h3h2", 0.5, 0.5, "partial_source"),
    ("no marker here", "h3h2", 0.2, 0.0, "no_marker"),
    ("…\nFINAL_ANSWER: g4h2", "h3h2", 0.2, 0.2, "partial_dest"),
]


@pytest.mark.parametrize("completion,expected,eta,reward,reason", WORKED)
def test_worked_examples(completion, expected, eta, reward, reason):
    out = score(completion, Move.from_uci(expected), RewardConfig(eta))
    assert (out.reward, out.reason) == (reward, reason)


def test_reasons():
    h = "h3h2"
    assert score("FINAL_ANSWER: H3H2", h).reason == "exact_match"
    assert score("FINAL_ANSWER: a1b1", h, RewardConfig(0.5)) == RewardOutcome(0.0, "wrong_move", "a1b1")
    assert score("FINAL_ANSWER: h3g2", h).reward == 0.0
    assert score("FINAL_ANSWER: Qh2#", h, RewardConfig(0.5)).reason == "unparseable"
    assert score("FINAL_ANSWER: h3h2\nFINAL_ANSWER: h3g2", h).reason == "wrong_move"


def test_source_beats_destination_and_never_stacks():
    out = score("FINAL_ANSWER: e7e8q", "e7e8", RewardConfig(0.2))
    assert (out.reward, out.reason) == (0.2, "partial_source")


def test_legality_annotation_does_not_change_score():
    from chessdistill.chess import parse_fen

    pos = parse_fen(EXAMPLE_FEN)
    illegal = score("FINAL_ANSWER: h3a3", "h3h2", RewardConfig(0.5), position=pos)
    assert (illegal.reward, illegal.legal) == (0.5, False)
    assert score("FINAL_ANSWER: h3h2", "h3h2", position=pos).legal is True


def test_bare_answer_when_marker_optional():
    cfg = RewardConfig(require_marker=False)
    assert score("the move is h3h2.", "h3h2", cfg).reward == 1.0
    assert score("", "h3h2", cfg).reason == "no_marker"
    assert score("plays Qh2", "h3h2", cfg).reason == "unparseable"


def test_config_bounds():
    for bad in (-0.1, 1.0, 1.5):
        with pytest.raises(ValueError):
            RewardConfig(bad)


def test_random_properties():
    outcomes = run_cases(2000, seed=11)
    reasons = Counter(o.reason for o in outcomes)
    assert set(reasons) == {"exact_match", "partial_source", "partial_dest", "wrong_move", "no_marker", "unparseable"}


uci = st.builds(lambda a, b: a + b, st.sampled_from([f"{f}{r}" for f in "abcdefgh" for r in "12345678"]),
                st.sampled_from([f"{f}{r}" for f in "abcdefgh" for r in "12345678"])).filter(lambda m: m[:2] != m[2:])


@settings(max_examples=400)
@given(st.text(max_size=80), uci, st.sampled_from([0.0, 0.2, 0.5, 0.75]), st.sampled_from(["", "\n", " "]))
def test_properties_hypothesis(prose, expected, eta, tail):
    check_case(prose, expected, eta)
    check_case(prose + "\nFINAL_ANSWER: " + expected + tail, expected, eta)


def test_batch_function_order_and_errors():
    items = [
        {"completion": "FINAL_ANSWER: h3h2", "expected": "h3h2"},
        {"completion": "nothing", "expected": "zz9x"},
        {"completion": "FINAL_ANSWER: g4h2", "expected": "h3h2"},
    ]
    results, bad = score_batch(items, RewardConfig(0.2))
    assert bad
    assert results == [
        {"reward": 1.0, "reason": "exact_match"},
        {"error": "invalid_expected"},
        {"reward": 0.2, "reason": "partial_dest"},
    ]


@pytest.fixture
def server():
    srv = serve(("127.0.0.1", 0), RewardConfig(0.5))
    t = threading.Thread(target=srv.serve_forever, daemon=True)
    t.start()
    yield srv
    srv.shutdown()
    srv.server_close()


def test_http_service(server):
    with httpx.Client(base_url=server.url) as c:
        assert c.get("/healthz").status_code == 200
        items = [
            {"completion": "FINAL_ANSWER: h3g2", "expected": "h3h2"},
            {"completion": "FINAL_ANSWER: h3h2", "expected": "h3h2"},
            {"completion": "x", "expected": "h3h2"},
        ]
        r = c.post("/v1/reward", json={"items": items})
        assert r.status_code == 200
        assert r.json() == {"results": [
            {"reward": 0.5, "reason": "partial_source"},
            {"reward": 1.0, "reason": "exact_match"},
            {"reward": 0.0, "reason": "no_marker"},
        ]}
        r = c.post("/v1/reward", json={"items": [items[1], {"completion": "x", "expected": "zz9x"}]})
        assert r.status_code == 400
        assert r.json()["results"] == [{"reward": 1.0, "reason": "exact_match"}, {"error": "invalid_expected"}]
        assert c.post("/v1/reward", content=b"{not json").status_code == 400
        assert c.post("/v1/reward", json={"nope": []}).status_code == 400
        assert c.get("/v1/reward").status_code == 404


def test_http_large_batch_single_request(server):
    items = [{"completion": f"FINAL_ANSWER: {'h3h2' if i % 2 else 'a1a2'}", "expected": "h3h2"} for i in range(10_000)]
    r = httpx.post(server.url + "/v1/reward", json={"items": items}, timeout=60)
    results = r.json()["results"]
    assert r.status_code == 200 and len(results) == 10_000
    assert [x["reward"] for x in results[:4]] == [0.0, 1.0, 0.0, 1.0]


def test_http_concurrent_requests(server):
    def call(i):
        exp = ["a2a4", "h3h2", "e7e8q"][i % 3]
        r = httpx.post(server.url + "/v1/reward", json={"items": [{"completion": f"FINAL_ANSWER: {exp}", "expected": exp}]})
        return r.json()["results"][0]["reward"]

    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(8) as ex:
        assert list(ex.map(call, range(40))) == [1.0] * 40


def test_reward_cli():
    lines = "FINAL_ANSWER: h3h2\nno marker\n" + json.dumps("analysis\nFINAL_ANSWER: h3g2") + "\n"
    out = subprocess.run(
        [sys.executable, "-m", "chessdistill.cli", "reward", "--expected", "h3h2", "--eta", "0.5"],
        input=lines, capture_output=True, text=True, check=True,
    )
    assert out.stdout == "1\texact_match\n0\tno_marker\n0.5\tpartial_source\n"

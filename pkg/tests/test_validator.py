import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chessdistill.chess import Move
from chessdistill.validator import (
    NoMarker,
    UnparseableMove,
    ValidatorConfig,
    count_sentences,
    extract_final_answer,
    leaked_themes,
    validate_trace,
)
from conftest import example_analysis, example_puzzle
from trace_cases import CASES, MARK, SIX, trace

PUZZLES = {
    "mate1": example_puzzle(),
    "tactic": example_puzzle(themes="backRankMate kingsideAttack mate short"),
}
H3H2 = Move.from_uci("h3h2")


def test_suite_size():
    assert len(CASES) >= 30
    assert {c[3] for c in CASES} == {"accepted", "rejected"}
    covered = {check for c in CASES for check in c[4]}
    assert covered == {"answer_match", "sentence_count", "forbidden_phrases", "no_marker_duplication"}


@pytest.mark.parametrize("name,kind,text,verdict,failed", CASES, ids=[c[0] for c in CASES])
def test_golden_trace(name, kind, text, verdict, failed):
    report = validate_trace(text, PUZZLES[kind], H3H2, example_analysis())
    assert (report.verdict, sorted(report.failed)) == (verdict, sorted(failed)), report.to_dict()


@pytest.mark.parametrize("text,expected", [
    ("...analysis...\nFINAL_ANSWER: h3h2", "h3h2"),
    ("FINAL_ANSWER: c2b1q", "c2b1q"),
    ("x\nFINAL_ANSWER:e2e4\n\n", "e2e4"),
    ("FINAL_ANSWER: a1a2\nmore\nFINAL_ANSWER: `a7a8N`", "a7a8n"),
    ("> FINAL_ANSWER: g1f3", "g1f3"),
])
def test_extract(text, expected):
    assert extract_final_answer(text).uci() == expected


def test_extract_promotion_fields():
    m = extract_final_answer("FINAL_ANSWER: c2b1q")
    assert (m.from_square.name, m.to_square.name, m.promotion.letter) == ("c2", "b1", "Q")


@pytest.mark.parametrize("text,exc", [
    ("the best move is Qh2#", NoMarker),
    ("FINAL_ANSWER: e4", UnparseableMove),
    ("FINAL_ANSWER:", UnparseableMove),
    ("FINAL_ANSWER: a1a1", UnparseableMove),
    ("so FINAL_ANSWER: h3h2", NoMarker),
])
def test_extract_errors(text, exc):
    with pytest.raises(exc):
        extract_final_answer(text)


@pytest.mark.parametrize("text,n", [
    ("One. Two! Three?", 3),
    ("No final punctuation", 1),
    ("After 1. e4 e5 2. Nf3 the game goes on.", 1),
    ("Black plays 12... Qh2 and wins. Done.", 2),
    ("Compare e.g. the rook, i.e. the piece on d8. Then stop.", 2),
    ("Wait... then go.", 1),
    ("", 0),
    ("Text.\nFINAL_ANSWER: h3h2", 1),
])
def test_count_sentences(text, n):
    assert count_sentences(text) == n


def test_leaked_themes():
    assert leaked_themes("a smothered mate", {"smotheredMate", "fork"}) == ["smotheredMate"]
    assert leaked_themes("a fork on e5", {"fork"}) == []
    assert leaked_themes("mateIn2 here", {"mateIn2"}) == ["mateIn2"]
    assert leaked_themes("mateIn21", {"mateIn2"}) == []


def test_soft_grounding_is_reported_not_rejecting():
    text = trace(*SIX[:5], "A stray a1h8 token does not block acceptance.")
    report = validate_trace(text, PUZZLES["tactic"], H3H2, example_analysis())
    grounding = next(c for c in report.checks if c.name == "move_grounding")
    assert report.accepted and not grounding.passed and "a1h8" in grounding.detail


def test_configurable_band():
    text = trace(*SIX[:3])
    assert not validate_trace(text, PUZZLES["tactic"], H3H2).accepted
    assert validate_trace(text, PUZZLES["tactic"], H3H2, cfg=ValidatorConfig(min_sentences=3)).accepted


def test_report_dict(puzzle):
    d = validate_trace(trace(*SIX), puzzle, H3H2).to_dict()
    assert d["verdict"] == "accepted" and d["extracted_answer"] == "h3h2" and d["puzzle_id"] == "EX001"
    assert [c["name"] for c in d["checks"]] == [
        "answer_match", "sentence_count", "forbidden_phrases", "no_marker_duplication", "move_grounding",
    ]


prose = st.text(st.characters(blacklist_categories=("Cs",)), max_size=200)


@settings(max_examples=300)
@given(prose, st.sampled_from(["", " ", "\t", "  \n", "\n\n"]))
def test_extract_ignores_surrounding_prose(before, trailing):
    text = before + "\n" + MARK + trailing
    if "FINAL_ANSWER" in before:
        return
    assert extract_final_answer(text) == H3H2


@settings(max_examples=300)
@given(prose, st.sampled_from(["h3h2", "h3g2", "e4", "H3H2", ""]))
def test_report_invariants(text, answer):
    full = text + "\nFINAL_ANSWER: " + answer
    report = validate_trace(full, PUZZLES["tactic"], H3H2)
    again = validate_trace(full, PUZZLES["tactic"], H3H2)
    assert report.to_dict() == again.to_dict()
    if report.accepted:
        assert report.extracted_answer.uci() == "h3h2"
    else:
        assert report.failed

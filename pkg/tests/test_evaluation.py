import json
from pathlib import Path

import pytest

from chessdistill.evaluation import (
    LEVELS,
    THEME_SPLIT_THEMES,
    AbortedRun,
    EvalReport,
    EvalSplit,
    InsufficientCell,
    ItemRecord,
    LevelBands,
    build_test_splits,
    evaluate,
    read_items,
    render_report,
    rescore,
)
from chessdistill.reward import RewardConfig
from chessdistill.teacher import RetryPolicy, TeacherConfig
from mock_llm import MockLLM, constant, oracle

GOLDEN = Path(__file__).parent / "golden"


@pytest.fixture(autouse=True)
def api_key(monkeypatch):
    monkeypatch.setenv("TEST_EVAL_KEY", "k")


def endpoint(srv, **kw):
    kw.setdefault("retry", RetryPolicy(3, 0.0, 0.0))
    return TeacherConfig(base_url=srv.url, model_name="mock-model", api_key_env="TEST_EVAL_KEY", max_concurrency=8, **kw)


@pytest.fixture(scope="module")
def splits(eval_population):
    return build_test_splits(eval_population, train_ids={"syn000000", "syn000001"}, seed=9)


def test_split_composition(splits, eval_population):
    theme, level = splits
    assert list(theme.cells) == list(THEME_SPLIT_THEMES) and list(level.cells) == list(LEVELS)
    assert all(len(v) == 25 for v in theme.cells.values())
    assert all(len(v) == 100 for v in level.cells.values())
    ids = theme.ids + level.ids
    assert len(ids) == len(set(ids)) == 900
    assert not {"syn000000", "syn000001"} & set(ids)
    for t, ps in theme.cells.items():
        assert all(t in p.themes for p in ps)
    bands = LevelBands()
    for lvl, ps in level.cells.items():
        assert all(bands.level(p.rating) == lvl for p in ps)


def test_split_determinism(eval_population, splits):
    again = build_test_splits(eval_population, train_ids={"syn000000", "syn000001"}, seed=9)
    assert [s.to_dict() for s in again] == [s.to_dict() for s in splits]
    other = build_test_splits(eval_population, seed=10)
    assert other[0].to_dict() != splits[0].to_dict()


def test_insufficient_cell(eval_population):
    with pytest.raises(InsufficientCell) as exc:
        build_test_splits(eval_population[:300])
    assert exc.value.label in THEME_SPLIT_THEMES + LEVELS


def test_level_bands():
    b = LevelBands()
    assert [b.level(r) for r in (399, 1099, 1100, 1699, 1700, 2299, 2300, 3200)] == [
        "Beginner", "Beginner", "Intermediate", "Intermediate", "Advanced", "Advanced", "Expert", "Expert"]
    with pytest.raises(ValueError):
        LevelBands(1500, 1400, 2000)


def answers_for(splits):
    return {p.fen: p.solution.uci() for s in splits for ps in s.cells.values() for p in ps}


def test_oracle_identity(splits, tmp_path):
    with MockLLM(oracle(answers_for(splits), padding_tokens=150)) as srv:
        report = evaluate(endpoint(srv), splits, out_dir=tmp_path)
        assert all(r["temperature"] == 0.0 for r in srv.requests)
        assert srv.calls == 900
    assert report.avg_accuracy == 100.0 and report.theme_split == 100.0
    assert all(v == 100.0 for v in report.cells.values()) and len(report.cells) == 24
    assert report.avg_tokens == 150
    text = (tmp_path / "report.txt").read_text()
    assert "100.0" in text and "150" in text
    data = json.loads((tmp_path / "report.json").read_text())
    assert data["difficulty"]["Avg Acc"] == 100.0 and data["n_items"] == 900
    assert len(read_items(tmp_path / "items.jsonl")) == 900


def test_constant_wrong(splits):
    with MockLLM(constant("Hmm.\nFINAL_ANSWER: a1a1")) as srv:
        report = evaluate(endpoint(srv), splits)
    assert report.avg_accuracy == 0.0 and all(v == 0.0 for v in report.cells.values())
    assert report.avg_tokens is None
    assert "Avg Tokens" in render_report(report)


def test_offline_rescore_is_exact(splits, tmp_path):
    answers = answers_for(splits)

    def half_right(prompt, body, i):
        status, payload = oracle(answers)(prompt, body, i)
        if hash(prompt) % 2:
            text = payload["choices"][0]["message"]["content"]
            payload["choices"][0]["message"]["content"] = text[:-2] + ("a1" if text[-2:] != "a1" else "b1")
        payload["usage"] = {"prompt_tokens": 3, "completion_tokens": 10 + i % 7}
        return status, payload

    with MockLLM(half_right) as srv:
        report = evaluate(endpoint(srv), splits, out_dir=tmp_path)
    again = rescore(tmp_path / "items.jsonl", model="mock-model")
    assert render_report(again) == render_report(report)
    assert json.dumps(again.to_dict()) == json.dumps(report.to_dict())
    partial = rescore(tmp_path / "items.jsonl", RewardConfig(0.5), model="mock-model")
    assert partial.avg_accuracy > report.avg_accuracy


def test_errors_count_zero_then_abort(splits):
    theme, _ = splits
    small = [EvalSplit("theme", {t: ps for t, ps in list(theme.cells.items())[:4]})]  # 100 items
    answers = answers_for(splits)

    def sometimes_down(rate):
        def b(prompt, body, i):
            fen_hash = sum(map(ord, prompt)) % 100
            return (503, {}) if fen_hash < rate else oracle(answers)(prompt, body, i)
        return b

    with MockLLM(sometimes_down(10)) as srv:
        report = evaluate(endpoint(srv), small)
    assert 0 < report.n_errors <= 20 and report.avg_accuracy == 100.0 * (100 - report.n_errors) / 100
    assert all(it.reason == "request_failed" for it in report.items if it.error)
    with MockLLM(sometimes_down(60)) as srv:
        with pytest.raises(AbortedRun):
            evaluate(endpoint(srv), small)


def synthetic_report():
    """Known cell values: level cells a/b correct out of 100, theme cells k of 25."""
    items = []
    level_right = {"Beginner": 65, "Intermediate": 39, "Advanced": 39, "Expert": 22}
    for lvl, right in level_right.items():
        for i in range(100):
            items.append(ItemRecord(f"{lvl}{i}", "level", lvl, "e2e4", "x", 170 + i % 17, 1.0))
            items[-1].reward = 1.0 if i < right else 0.0
    for j, theme in enumerate(THEME_SPLIT_THEMES):
        for i in range(25):
            items.append(ItemRecord(f"{theme}{i}", "theme", theme, "e2e4", "x", 180 + i % 5, 1.0))
            items[-1].reward = 1.0 if i < (j * 3) % 26 else 0.0
    return EvalReport("C-test", items)


def test_render_golden():
    report = synthetic_report()
    text = render_report(report)
    path = GOLDEN / "report_synthetic.txt"
    import os

    if os.environ.get("CHESSDISTILL_REGEN_GOLDEN") == "1":
        path.write_text(text)
    assert text == path.read_text()


def test_avg_acc_is_item_mean():
    report = synthetic_report()
    level = [report.accuracy("level", l) for l in LEVELS]
    expected = (400 * sum(level) / 4 + 500 * report.theme_split) / 900
    assert report.avg_accuracy == pytest.approx(expected)
    assert report.avg_accuracy == pytest.approx(100 * sum(it.reward for it in report.items) / 900)


def test_missing_usage_dash():
    items = [ItemRecord("a", "level", "Beginner", "e2e4", "FINAL_ANSWER: e2e4", None, 0.1)]
    items[0].reward = 1.0
    text = render_report(EvalReport("m", items))
    line = text.splitlines()[3]
    assert line.split()[-1] == "-"

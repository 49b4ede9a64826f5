import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import ASPARAGUSATE_TEXT, DPPC, THIOPHENE_CHO
from molrl import rewards
from molrl.rewards import (
    ABLATION_LADDERS, CAPTION, GENERATION, RewardMask, SchemaError, extract_answer, r_cap, r_gen, r_structural,
    read_jsonl, score, score_batch,
)
from molrl.selfies import decode_selfies
from molrl.textmetrics import selfies_sim
from synth_suite import GOLD, MALFORMED, build_suite

SUITE = build_suite()

# appendix Case I: the reasoning model's closing lines, with the wrapped SELFIES joined
CASE_ONE = (
    "The final answer, representing the constructed molecular structure, is: "
    f"<answer>{DPPC}</answer>"
)


def test_extract_simple():
    parsed = extract_answer("<answer>X</answer>")
    assert parsed.format_ok and parsed.extracted_answer == "X"


def test_extract_case_one():
    parsed = extract_answer(CASE_ONE)
    assert parsed.format_ok and parsed.extracted_answer == DPPC


@pytest.mark.parametrize("text", [
    "<answer>A</answer><answer>B</answer>",
    "<answer><answer>A</answer></answer>",
    "</answer>A<answer>",
    "<answer>A",
    "A",
    "<answer> \n </answer>",
    "<ANSWER>A</ANSWER>",
])
def test_extract_rejects(text):
    assert not extract_answer(text).format_ok


def test_extract_whitespace_tolerant():
    assert extract_answer("< answer >  X \n</ answer >").extracted_answer == "X"


def test_r_cap_cases():
    assert r_cap("no tags here", ASPARAGUSATE_TEXT).total == 0.0
    gold = r_cap(f"<answer>{ASPARAGUSATE_TEXT}</answer>", ASPARAGUSATE_TEXT)
    assert 1.98 <= gold.total <= 2.0
    assert r_cap("<answer>zebra</answer>", ASPARAGUSATE_TEXT).total == 0.5


def test_breakdown_invariants():
    b = r_cap("<answer>The molecule is an acid.</answer>", ASPARAGUSATE_TEXT)
    assert b.total == b.format_component + b.similarity_component
    assert b.format_component == 0.5 and set(b.sub_scores) == set(rewards.LANGUAGE_METRICS)


def test_r_gen_cases():
    assert r_gen(DPPC, DPPC).total == 0.0
    assert r_gen(f"<answer>{DPPC}</answer>", DPPC).total == 2.0
    gold = r_gen(f"<answer>{THIOPHENE_CHO}</answer>", THIOPHENE_CHO)
    assert gold.total == 2.0 and gold.decoded


def test_r_gen_undecodable_fallback():
    garbage = "C1CC(]]"
    b = r_gen(f"<answer>{garbage}</answer>", THIOPHENE_CHO)
    assert b.decoded is False
    assert b.total == pytest.approx(0.5 + 1.5 * selfies_sim(garbage, THIOPHENE_CHO) / 4, abs=1e-15)


def test_r_structural_identity_and_mean(monkeypatch, thio):
    assert r_structural(thio, thio, THIOPHENE_CHO, THIOPHENE_CHO) == 1.0
    monkeypatch.setattr(rewards, "structural_scores",
                        lambda *a: {"fp_sim": 0.8, "selfies_sim": 0.6, "frag_sim": 0.4, "fg_match": 0.2})
    assert rewards.r_structural(thio, thio, "", "") == pytest.approx(0.5)


def test_r_structural_thiophene_vs_furan(thio):
    furan_text = "[O][=C][C][=C][C][=C][O][Ring1][Branch1]"
    furan = decode_selfies(furan_text)
    scores = rewards.structural_scores(thio, furan, THIOPHENE_CHO, furan_text)
    assert scores["frag_sim"] == pytest.approx(5 / 12)
    assert 0.0 < r_structural(thio, furan, THIOPHENE_CHO, furan_text) < 1.0


def test_suite_identities():
    for case in SUITE:
        total = score(case.response, case.reference, case.task).total
        assert 0.0 <= total <= 2.0
        if case.kind == MALFORMED:
            assert total == 0.0
        if case.kind == GOLD:
            assert total == 2.0 if case.task == GENERATION else total >= 1.98


def test_gold_is_the_maximum():
    by_ref: dict[tuple[str, str], list[float]] = {}
    for case in SUITE:
        by_ref.setdefault((case.task, case.reference), []).append(score(case.response, case.reference, case.task).total)
    for (task, ref), totals in by_ref.items():
        best = score(f"<answer>{ref}</answer>", ref, task).total
        assert max(totals) <= best + 1e-12


def test_deterministic():
    case = SUITE[3]
    assert score(case.response, case.reference, case.task) == score(case.response, case.reference, case.task)


@given(st.text(max_size=40))
def test_reward_bounds_on_arbitrary_text(text):
    assert 0.0 <= r_cap(text, ASPARAGUSATE_TEXT).total <= 2.0
    assert 0.0 <= r_gen(text, THIOPHENE_CHO).total <= 2.0


def test_format_only_mask():
    mask = RewardMask(frozenset())
    assert mask.describe() == "format-only"
    totals = {score(c.response, c.reference, c.task, mask).total for c in SUITE}
    assert totals == {0.0, 0.5}


@pytest.mark.parametrize("task", [CAPTION, GENERATION])
def test_ablation_ladder_enlarges_range(task):
    cases = [c for c in SUITE if c.task == task]
    previous = None
    for step in ABLATION_LADDERS[task]:
        mask = RewardMask(frozenset(step))
        totals = [score(c.response, c.reference, c.task, mask).total for c in cases]
        if previous is not None:
            assert max(totals) > max(previous)
            assert all(t >= p for t, p in zip(totals, previous))
        previous = totals


def test_score_unknown_task():
    with pytest.raises(ValueError):
        score("<answer>x</answer>", "x", "translation")


def test_batch_validation():
    with pytest.raises(SchemaError):
        score_batch([{"response": "x", "reference": "y"}])
    with pytest.raises(SchemaError):
        score_batch([{"response": "x", "reference": "y", "task": "other"}])
    with pytest.raises(SchemaError):
        read_jsonl(["{not json"])


def test_batch_parallel_matches_serial():
    records = [{"response": c.response, "reference": c.reference, "task": c.task} for c in SUITE[:30]]
    serial = score_batch(records)
    assert score_batch(records, workers=4) == serial
    assert [r["total"] for r in serial] == [score(c.response, c.reference, c.task).total for c in SUITE[:30]]

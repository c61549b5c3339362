import json
import random

import pytest

from navqa.errors import (
    EmptyGoldError,
    MalformedResponseError,
    NavqaError,
    SchemaError,
    ShapeMismatchError,
)
from navqa.evaluation import (
    EvalReport,
    JudgeScores,
    JudgedItem,
    aggregate_report,
    compare_runs,
    judge_answer,
    recall_at_k,
    render_delta_text,
    render_report_text,
)
from navqa.gateway import GatewayClient
from navqa.qa import DistanceThresholds

from helpers import FakeGateway, make_item


def test_recall_examples():
    assert recall_at_k([3, 1, 7, 9], {1, 9}, 4) == 1.0
    assert recall_at_k([3, 1, 7, 9], {1, 9}, 2) == 0.5
    assert recall_at_k([3, 1, 7, 9], {5}, 4) == 0.0
    assert recall_at_k([3, 3, 1], {3}, 1) == 1.0


def test_recall_monotone_in_k():
    random_ = random.Random(7)
    retrieved = random_.sample(range(100), 40)
    gold = set(random_.sample(range(100), 10))
    last = 0.0
    for k in range(1, 41):
        value = recall_at_k(retrieved, gold, k)
        assert value >= last
        last = value


def test_recall_errors():
    with pytest.raises(EmptyGoldError):
        recall_at_k([1, 2], set(), 2)
    with pytest.raises(NavqaError):
        recall_at_k([1, 2], {1}, 0)


def test_judge_scores_validation():
    scores = JudgeScores(5, 4, 3, 2)
    assert scores.as_dict() == {
        "comprehensiveness": 5,
        "depth": 4,
        "evidence": 3,
        "reasoning": 2,
    }
    with pytest.raises(SchemaError):
        JudgeScores(6, 0, 0, 0)
    with pytest.raises(SchemaError):
        JudgeScores(-1, 0, 0, 0)
    with pytest.raises(SchemaError):
        JudgeScores(True, 0, 0, 0)
    with pytest.raises(SchemaError):
        JudgeScores(1.5, 0, 0, 0)


def _judge_reply(c=4, d=3, e=5, r=2):
    return json.dumps(
        {"comprehensiveness": c, "depth": d, "evidence": e, "reasoning": r}
    )


def test_judge_answer_parses_reply():
    gateway = FakeGateway([_judge_reply()])
    scores = judge_answer(gateway, "Why?", "Because of the storm.", "The storm.")
    assert scores == JudgeScores(4, 3, 5, 2)
    prompt = gateway.requests[0].prompt
    assert "Reference answer: Because of the storm." in prompt
    assert "Candidate answer: The storm." in prompt
    assert gateway.requests[0].task == "judge"


@pytest.mark.parametrize(
    "reply",
    [
        '{"comprehensiveness": 4, "depth": 3, "evidence": 5}',
        _judge_reply(c=6),
        _judge_reply(c=-1),
        '{"comprehensiveness": "4", "depth": 3, "evidence": 5, "reasoning": 2}',
        '{"comprehensiveness": true, "depth": 3, "evidence": 5, "reasoning": 2}',
        "```json\n{}\n```",
        "not json at all",
    ],
)
def test_judge_answer_rejects_bad_replies(reply):
    with pytest.raises(MalformedResponseError):
        judge_answer(FakeGateway([reply]), "Why?", "gold", "pred")


def test_judge_answer_rejects_empty_inputs():
    with pytest.raises(SchemaError):
        judge_answer(FakeGateway([]), "", "gold", "pred")
    with pytest.raises(SchemaError):
        judge_answer(FakeGateway([]), "Why?", "gold", "")


def test_mock_judge_gives_full_marks_to_identical_answers():
    gateway = GatewayClient("mock:11")
    scores = judge_answer(gateway, "Why?", "same words", "same words")
    assert scores == JudgeScores(5, 5, 5, 5)


def _judged(scores, distance="short", reasoning="causal", retrieved=None, gold=None):
    return JudgedItem(
        item=make_item(scene_distance=distance, reasoning_type=reasoning),
        scores=JudgeScores(*scores),
        retrieved=tuple(retrieved) if retrieved is not None else None,
        gold=tuple(gold) if gold is not None else None,
    )


def test_aggregate_single_bucket_cells():
    judged = [_judged((3, 4, 3, 2)), _judged((3, 4, 3, 2))]
    report = aggregate_report(judged)
    assert report.cells == {
        "short": {
            "comprehensiveness": 60.0,
            "depth": 80.0,
            "evidence": 60.0,
            "reasoning": 40.0,
        }
    }
    assert report.overall == pytest.approx(60.0, abs=1e-12)
    assert report.counts == {"short": 2}


def test_aggregate_mixes_within_cell():
    judged = [_judged((5, 5, 5, 5)), _judged((0, 5, 5, 5))]
    report = aggregate_report(judged)
    assert report.cells["short"]["comprehensiveness"] == pytest.approx(50.0)
    assert report.cells["short"]["depth"] == pytest.approx(100.0)


def test_aggregate_overall_weights_cells_not_items():
    # 9 short items at 100 and 1 far item at 0: cell mean is 50, item mean is 90.
    judged = [_judged((5, 5, 5, 5)) for _ in range(9)]
    judged.append(_judged((0, 0, 0, 0), distance="far"))
    report = aggregate_report(judged)
    assert report.overall == pytest.approx(50.0, abs=1e-12)


def test_aggregate_absent_buckets_are_absent():
    report = aggregate_report([_judged((5, 5, 5, 5), distance="medium")])
    assert set(report.cells) == {"medium"}
    assert "short" not in report.cells
    assert "short" not in report.recall


def test_aggregate_is_order_invariant():
    random_ = random.Random(9)
    judged = [
        _judged(
            [random_.randint(0, 5) for _ in range(4)],
            distance=random_.choice(["short", "medium", "far"]),
            reasoning=random_.choice(["causal", "narrative"]),
            retrieved=random_.sample(range(30), 10),
            gold=random_.sample(range(30), 3),
        )
        for _ in range(60)
    ]
    base = aggregate_report(judged)
    for _ in range(5):
        random_.shuffle(judged)
        again = aggregate_report(judged)
        assert again.cells == base.cells
        assert again.overall == base.overall
        assert again.recall == base.recall
        assert again.per_reasoning == base.per_reasoning


def test_aggregate_per_reasoning_means_items():
    judged = [
        _judged((5, 5, 5, 5), reasoning="causal"),
        _judged((0, 0, 0, 0), reasoning="causal", distance="far"),
        _judged((5, 0, 5, 0), reasoning="narrative"),
    ]
    report = aggregate_report(judged)
    assert report.per_reasoning["causal"] == pytest.approx(50.0)
    assert report.per_reasoning["narrative"] == pytest.approx(50.0)


def test_aggregate_recall_uses_gold_override():
    judged = [
        _judged((5, 5, 5, 5), retrieved=[7, 8], gold=[7, 8]),
        _judged((5, 5, 5, 5), retrieved=[1, 2], gold=None),
    ]
    # second item falls back to its evidence events (2, 9, 14): one hit of three
    report = aggregate_report(judged, k=2)
    assert report.recall["short"] == pytest.approx((1.0 + 1 / 3) / 2)
    assert report.k == 2


def test_aggregate_recall_skips_unretrieved_items():
    report = aggregate_report([_judged((5, 5, 5, 5))])
    assert report.recall == {}


def test_aggregate_with_thresholds_rebuckets():
    item = _judged((5, 5, 5, 5), distance="short")
    assert item.item.evidence_events == (2, 9, 14)
    stored = aggregate_report([item])
    assert set(stored.cells) == {"short"}
    recomputed = aggregate_report([item], thresholds=DistanceThresholds())
    assert set(recomputed.cells) == {"medium"}


def test_aggregate_empty():
    report = aggregate_report([])
    assert report.cells == {}
    assert report.overall is None
    assert report.recall == {}


def test_compare_runs_zero_delta():
    judged = [_judged((3, 4, 3, 2)), _judged((2, 2, 5, 1), distance="far")]
    report = aggregate_report(judged)
    delta = compare_runs(report, report)
    for bucket in delta.cells:
        for value in delta.cells[bucket].values():
            assert value == 0.0
    assert delta.overall_delta == 0.0
    assert delta.largest_drop[2] == 0.0


def test_compare_runs_finds_largest_drop():
    a = aggregate_report([_judged((5, 5, 5, 5))])
    b = aggregate_report([_judged((5, 5, 0, 5))])
    delta = compare_runs(b, a)
    assert delta.cells["short"]["evidence"] == pytest.approx(-100.0)
    bucket, metric, value = delta.largest_drop
    assert (bucket, metric) == ("short", "evidence")
    assert value == pytest.approx(-100.0)
    assert delta.overall_delta == pytest.approx(-25.0)


def test_compare_runs_shape_mismatch():
    a = aggregate_report([_judged((5, 5, 5, 5), distance="short")])
    b = aggregate_report([_judged((5, 5, 5, 5), distance="far")])
    with pytest.raises(ShapeMismatchError):
        compare_runs(a, b)


def test_render_report_text():
    judged = [
        _judged((3, 4, 3, 2), retrieved=[2, 9], gold=[2, 9]),
        _judged((2, 2, 5, 1), distance="far"),
    ]
    text = render_report_text(aggregate_report(judged, k=5))
    lines = text.splitlines()
    assert lines[0].startswith("# overall averages")
    assert "recall@5" in lines[1]
    short_row = next(l for l in lines if l.startswith("short"))
    assert "60.00" in short_row and "80.00" in short_row and "1.00" in short_row
    far_row = next(l for l in lines if l.startswith("far"))
    assert far_row.rstrip().endswith("-")
    assert any(l.startswith("overall ") for l in lines)
    assert any(l.startswith("reasoning causal") for l in lines)
    assert text.endswith("\n")


def test_render_report_buckets_in_timeline_order():
    judged = [
        _judged((1, 1, 1, 1), distance="far"),
        _judged((1, 1, 1, 1), distance="short"),
        _judged((1, 1, 1, 1), distance="medium"),
    ]
    text = render_report_text(aggregate_report(judged))
    assert text.index("short") < text.index("medium") < text.index("far")


def test_render_delta_text():
    a = aggregate_report([_judged((5, 5, 5, 5))])
    b = aggregate_report([_judged((5, 5, 0, 5))])
    text = render_delta_text(compare_runs(b, a))
    assert "-100.00" in text
    assert "largest drop short/evidence" in text


def test_report_to_dict_shape():
    report = aggregate_report([_judged((3, 4, 3, 2), retrieved=[2], gold=[2])], k=3)
    doc = report.to_dict()
    assert doc["note"] == "overall averages the present bucket x dimension cells"
    assert doc["k"] == 3
    assert doc["cells"]["short"]["depth"] == 80.0
    assert doc["recall"]["short"] == 1.0
    assert doc["overall"] == pytest.approx(60.0)
    empty = EvalReport({}, None, {}, {}, 3, {}).to_dict()
    assert "overall" not in empty

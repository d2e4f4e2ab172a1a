import json

import pytest
from hypothesis import given, strategies as st

from tirforge.schema import (
    EvalOutcome,
    ExecStatus,
    ExecutionResult,
    Metrics,
    PatternLabel,
    PreferencePair,
    Problem,
    SFTExample,
    Solution,
    TeacherRecord,
    dumps_line,
    pair_from_dict,
    pair_to_dict,
    problem_from_dict,
    problem_to_dict,
    record_from_dict,
    record_to_dict,
    sft_example_from_dict,
    sft_example_to_dict,
    validate_record,
)

text = st.text(min_size=1, max_size=80).filter(lambda s: s.strip())
labels = st.sampled_from(list(PatternLabel))


def make_solution(reasoning="Direct computation is simplest here.", code="print(4)",
                  outputs=("4",), answer="4"):
    return Solution(reasoning=reasoning, code=code, claimed_outputs=outputs, final_answer=answer)


def make_record(**overrides):
    fields = dict(
        problem_id="p1",
        chosen_pattern=PatternLabel.B,
        chosen=make_solution(),
        counter=make_solution(
            reasoning="A short loop makes the same count explicit.",
            code="total = 0\nfor k in range(5):\n    total += 1\nprint(total - 1)",
        ),
        raw="{}",
    )
    fields.update(overrides)
    return TeacherRecord(**fields)


class TestPatternLabel:
    def test_complement_is_involution(self):
        for label in PatternLabel:
            assert label.complement().complement() is label

    def test_names_are_fixed(self):
        assert PatternLabel.A.pattern_name == "algorithmic"
        assert PatternLabel.B.pattern_name == "calculator"


class TestValidation:
    def test_well_formed_record(self):
        assert validate_record(make_record()) == []

    def test_empty_code(self):
        record = make_record(chosen=make_solution(code=""))
        assert "empty code block" in validate_record(record)

    def test_duplicated_reasoning(self):
        counter = make_solution(
            reasoning="Direct computation is simplest here.", code="print(2 + 2)"
        )
        assert "duplicated reasoning" in validate_record(make_record(counter=counter))

    def test_duplicated_code(self):
        counter = make_solution(reasoning="Another angle on the same sum.", code="print(4)")
        assert "duplicated code" in validate_record(make_record(counter=counter))

    def test_whitespace_normalization_in_duplicate_check(self):
        counter = make_solution(
            reasoning="Direct   computation is\nsimplest here.", code="print(2+2)"
        )
        assert "duplicated reasoning" in validate_record(make_record(counter=counter))


class TestInvariantEnforcement:
    def test_problem_requires_id_and_statement(self):
        with pytest.raises(ValueError):
            Problem(id="", statement="x")
        with pytest.raises(ValueError):
            Problem(id="p", statement="")

    def test_pair_requires_distinct_sides(self):
        with pytest.raises(ValueError):
            PreferencePair(id="p", prompt="q", winner="same", loser="same",
                           winner_pattern=PatternLabel.A)

    def test_outcome_requires_code_for_execution(self):
        with pytest.raises(ValueError):
            EvalOutcome(problem_id="p", has_code=False, code_executed=True, answer_correct=False)

    def test_metrics_bounds(self):
        with pytest.raises(ValueError):
            Metrics(n=10, pass1=0.5, code1=0.2, codepass1=0.4)
        with pytest.raises(ValueError):
            Metrics(n=10, pass1=1.5, code1=0.0, codepass1=0.0)

    def test_execution_result_rejects_negative_wall(self):
        with pytest.raises(ValueError):
            ExecutionResult(status=ExecStatus.OK, stdout="", stderr="", wall_ms=-1)


class TestSerialization:
    @given(pid=text, statement=text, gold=st.none() | text, source=st.text(max_size=20))
    def test_problem_round_trip(self, pid, statement, gold, source):
        problem = Problem(id=pid, statement=statement, gold_answer=gold, source=source)
        assert problem_from_dict(problem_to_dict(problem)) == problem

    @given(
        reasoning=text, code=text, outputs=st.lists(st.text(max_size=30), max_size=4),
        answer=text, label=labels,
    )
    def test_record_round_trip(self, reasoning, code, outputs, answer, label):
        record = TeacherRecord(
            problem_id="p1",
            chosen_pattern=label,
            chosen=Solution(reasoning, code, tuple(outputs), answer),
            counter=Solution(reasoning + "!", code + "#", tuple(outputs), answer),
            raw="raw text",
        )
        assert record_from_dict(record_to_dict(record)) == record

    @given(prompt=text, target=text, label=labels)
    def test_sft_round_trip(self, prompt, target, label):
        ex = SFTExample(id="p/chosen", prompt=prompt, target=target, pattern=label)
        assert sft_example_from_dict(sft_example_to_dict(ex)) == ex

    @given(prompt=text, w=text, label=labels)
    def test_pair_round_trip(self, prompt, w, label):
        pair = PreferencePair(id="p", prompt=prompt, winner=w, loser=w + "x", winner_pattern=label)
        assert pair_from_dict(pair_to_dict(pair)) == pair

    def test_serialization_is_byte_stable(self):
        record = make_record()
        once = dumps_line(record_to_dict(record))
        twice = dumps_line(record_to_dict(record_from_dict(json.loads(once))))
        assert once == twice

    def test_unknown_fields_tolerated_on_read_dropped_on_write(self):
        row = problem_to_dict(Problem(id="p", statement="s"))
        row["future_field"] = 123
        problem = problem_from_dict(row)
        assert "future_field" not in problem_to_dict(problem)

    def test_canonical_field_names(self):
        assert list(problem_to_dict(Problem(id="p", statement="s"))) == [
            "id", "statement", "gold_answer", "source",
        ]
        assert list(record_to_dict(make_record())) == [
            "problem_id", "chosen_pattern", "chosen", "counter", "raw",
        ]
        assert list(record_to_dict(make_record())["chosen"]) == [
            "reasoning", "code", "claimed_outputs", "final_answer",
        ]
        example = SFTExample(id="i", prompt="p", target="t", pattern=PatternLabel.A)
        assert list(sft_example_to_dict(example)) == ["id", "prompt", "target", "pattern"]
        pair = PreferencePair(id="i", prompt="p", winner="w", loser="l",
                              winner_pattern=PatternLabel.B)
        assert list(pair_to_dict(pair)) == ["id", "prompt", "winner", "loser", "winner_pattern"]


class TestMetricsInvariant:
    @given(st.lists(st.tuples(st.booleans(), st.booleans(), st.booleans()), min_size=1, max_size=200))
    def test_codepass_bounded_for_any_outcome_multiset(self, flags):
        outcomes = [
            EvalOutcome(
                problem_id=str(i),
                has_code=has or ran,
                code_executed=ran,
                answer_correct=correct,
            )
            for i, (has, ran, correct) in enumerate(flags)
        ]
        n = len(outcomes)
        metrics = Metrics(
            n=n,
            pass1=sum(o.answer_correct for o in outcomes) / n,
            code1=sum(o.code_executed for o in outcomes) / n,
            codepass1=sum(o.code_executed and o.answer_correct for o in outcomes) / n,
        )
        assert metrics.codepass1 <= min(metrics.code1, metrics.pass1)

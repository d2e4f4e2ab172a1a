import json
import random
from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from tirforge.dataset import render_solution
from tirforge.parsing import (
    BadPattern,
    MissingKey,
    NoJsonFound,
    ParseError,
    SchemaViolation,
    extract_json_payload,
    parse_completion,
    parse_teacher_record,
    reasoning_style_warnings,
)
from tirforge.schema import Problem, Solution, record_to_dict, validate_record

ERROR_TYPES = {
    "MissingKey": MissingKey,
    "SchemaViolation": SchemaViolation,
    "BadPattern": BadPattern,
    "NoJsonFound": NoJsonFound,
}


def corpus_files(fixtures_dir: Path):
    return sorted((fixtures_dir / "teacher").glob("*.txt"))


def expected_for(path: Path) -> dict:
    return json.loads((path.parent / "expected" / f"{path.stem}.json").read_text())


class TestExtractJsonPayload:
    def test_identity_on_pure_json(self):
        assert extract_json_payload('{"a":1}') == '{"a":1}'

    def test_fence_stripping(self):
        assert extract_json_payload('```json\n{"a":1}\n```') == '{"a":1}'

    def test_prose_wrapped(self):
        assert extract_json_payload('Sure! {"a":{"b":2}} hope it helps') == '{"a":{"b":2}}'

    def test_picks_largest_balanced_object(self):
        raw = 'first {"x":1} then {"y":{"z":[1,2,3]}} done'
        assert extract_json_payload(raw) == '{"y":{"z":[1,2,3]}}'

    def test_braces_inside_strings_do_not_confuse_the_scanner(self):
        raw = 'note {"text":"uses { and } inside","n":1} trailing'
        assert json.loads(extract_json_payload(raw)) == {"text": "uses { and } inside", "n": 1}

    def test_no_json_found(self):
        with pytest.raises(NoJsonFound):
            extract_json_payload("there is no structured content here")

    @given(st.sampled_from(["{}", '{"a":1}', '{"a":{"b":[1,2]}}']),
           st.sampled_from(["", "Sure! ", "```json\n"]),
           st.sampled_from(["", " thanks", "\n```"]))
    def test_idempotent(self, payload, prefix, suffix):
        if prefix.startswith("```") != suffix.endswith("```"):
            prefix, suffix = "", ""
        extracted = extract_json_payload(prefix + payload + suffix)
        assert extract_json_payload(extracted) == extracted


class TestTeacherCorpus:
    def test_well_formed_fixtures_parse(self, fixtures_dir):
        ok_files = [p for p in corpus_files(fixtures_dir) if p.stem.startswith("ok_")]
        assert len(ok_files) >= 20
        parsed = 0
        for path in ok_files:
            expected = expected_for(path)
            record = parse_teacher_record(
                extract_json_payload(path.read_text()), expected["problem_id"]
            )
            assert record_to_dict(record) == expected["record"], path.name
            parsed += 1
        assert parsed == len(ok_files)

    def test_malformed_fixtures_raise_expected_error(self, fixtures_dir):
        bad_files = [p for p in corpus_files(fixtures_dir) if p.stem.startswith("bad_")]
        assert len(bad_files) >= 6
        for path in bad_files:
            expected = expected_for(path)
            with pytest.raises(ERROR_TYPES[expected["error"]]):
                parse_teacher_record(
                    extract_json_payload(path.read_text()), expected["problem_id"]
                )

    def test_never_constructs_invalid_record(self, fixtures_dir):
        for path in corpus_files(fixtures_dir):
            try:
                record = parse_teacher_record(
                    extract_json_payload(path.read_text()), "any-id"
                )
            except ParseError:
                continue
            assert validate_record(record) == []


class TestParseTeacherRecord:
    BASE = {
        "problem": "What is 2+2?",
        "chosen_pattern": "B",
        "chosen_solution": {
            "reasoning": "One addition settles it.",
            "code_blocks": ["print(2+2)"],
            "outputs": ["4"],
            "final_answer": "4",
        },
        "counter_solution": {
            "reasoning": "A loop counts up to the same value.",
            "code_blocks": ["t=0\nfor _ in range(4): t+=1\nprint(t)"],
            "outputs": ["4"],
            "final_answer": "4",
        },
    }

    def test_maps_pattern_label(self):
        record = parse_teacher_record(json.dumps(self.BASE), "p9")
        assert record.problem_id == "p9"
        assert record.chosen_pattern.value == "B"
        assert record.chosen.code == "print(2+2)"

    def test_missing_counter_solution(self):
        broken = {k: v for k, v in self.BASE.items() if k != "counter_solution"}
        with pytest.raises(MissingKey) as err:
            parse_teacher_record(json.dumps(broken), "p")
        assert "counter_solution" in str(err.value)

    def test_two_code_blocks_rejected(self):
        broken = json.loads(json.dumps(self.BASE))
        broken["counter_solution"]["code_blocks"] = ["print(1)", "print(2)"]
        with pytest.raises(SchemaViolation):
            parse_teacher_record(json.dumps(broken), "p")

    def test_bad_pattern_value(self):
        broken = json.loads(json.dumps(self.BASE))
        broken["chosen_pattern"] = "Q"
        with pytest.raises(BadPattern):
            parse_teacher_record(json.dumps(broken), "p")

    def test_trailing_newline_in_code_is_normalized(self):
        body = json.loads(json.dumps(self.BASE))
        body["chosen_solution"]["code_blocks"] = ["print(2+2)\n"]
        record = parse_teacher_record(json.dumps(body), "p")
        assert record.chosen.code == "print(2+2)"


class TestParseCompletion:
    def test_canonical_transcript(self):
        parsed = parse_completion("thoughts\n```python\nprint(4)\n```\n4\nFinal answer: 4")
        assert parsed.code_blocks == ("print(4)",)
        assert parsed.final_answer == "4"
        assert parsed.reasoning == "thoughts"

    def test_boxed_answer_without_code(self):
        parsed = parse_completion("the answer is \\boxed{42}")
        assert parsed.code_blocks == ()
        assert parsed.final_answer == "42"

    def test_nested_braces_in_boxed(self):
        assert parse_completion("\\boxed{\\frac{1}{2}}").final_answer == "\\frac{1}{2}"

    # Hand-labeled oracle pairs for the brace-depth scanner.
    @pytest.mark.parametrize(
        "text,expected",
        [
            ("so \\boxed{x^{2} + 1} candidly", "x^{2} + 1"),
            ("first \\boxed{1} then \\boxed{2}", "2"),
            ("\\boxed{ {a} and {b} }", "{a} and {b}"),
            ("\\boxed{unclosed", None),
            ("no marker at all", None),
        ],
    )
    def test_boxed_scanner_against_hand_labels(self, text, expected):
        assert parse_completion(text).final_answer == expected

    def test_boxed_takes_priority_over_phrase(self):
        parsed = parse_completion("Final answer: 5 is wrong, really \\boxed{6}")
        assert parsed.final_answer == "6"

    def test_multiple_code_blocks_all_collected(self):
        text = "a\n```python\nx=1\n```\nb\n```\ny=2\n```\nFinal answer: 3"
        parsed = parse_completion(text)
        assert parsed.code_blocks == ("x=1", "y=2")
        assert parsed.reasoning == "a"

    def test_no_answer_marker_yields_none(self):
        assert parse_completion("just musing, no commitment").final_answer is None

    def test_outputs_section_captured(self):
        text = "r\n\n```python\nprint(7)\n```\n\nOutputs:\n7\n\nFinal answer: 7\n"
        assert parse_completion(text).claimed_outputs == "7"


class TestRenderParseRoundTrip:
    def test_round_trip_on_200_randomized_solutions(self):
        rng = random.Random(20240817)
        words = "sum digits primes loop bound check modulo total scan value".split()
        problem = Problem(id="rt", statement="irrelevant")
        for i in range(200):
            reasoning = " ".join(rng.choices(words, k=rng.randint(4, 14))).capitalize() + "."
            code_lines = [f"x{j} = {rng.randint(0, 999)}" for j in range(rng.randint(1, 4))]
            code_lines.append(f"print(x0 + {rng.randint(1, 9)})")
            code = "\n".join(code_lines)
            outputs = tuple(str(rng.randint(0, 10**6)) for _ in range(rng.randint(0, 3)))
            answer = str(rng.randint(-1000, 1000))
            solution = Solution(reasoning, code, outputs, answer)
            parsed = parse_completion(render_solution(problem, solution))
            assert parsed.code_blocks == (code,), i
            assert parsed.final_answer == answer, i


class TestReasoningStyleWarnings:
    def test_clean_paragraph_has_no_warnings(self):
        assert reasoning_style_warnings("One continuous paragraph without lists.") == []

    @pytest.mark.parametrize("marker", ["- item", "* item", "1. item", "(1) item", "2) item"])
    def test_list_markers_warn(self, marker):
        assert reasoning_style_warnings(f"intro\n{marker}\nmore") != []

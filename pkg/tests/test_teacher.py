import json
import threading
from pathlib import Path

import pytest

from tirforge.mockteacher import Fixture, MockTeacherServer
from tirforge.schema import PatternLabel, Problem
from tirforge.teacher import (
    AuthFailure,
    CacheStore,
    EndpointConfig,
    ExhaustedRetries,
    TeacherClient,
    UnparseableJudgment,
    build_double_pattern_prompt,
    build_pattern_judge_prompt,
    extract_pattern_judgment,
)

PROBLEM = Problem(id="t1", statement="What is 1+1?")


def make_config(base_url: str, **overrides) -> EndpointConfig:
    defaults = dict(
        base_url=base_url,
        model_name="mock-teacher",
        api_key="test-key",
        max_concurrency=4,
        timeout_s=10.0,
        max_retries=3,
        temperature=0.0,
        backoff_base_s=0.01,
    )
    defaults.update(overrides)
    return EndpointConfig(**defaults)


@pytest.fixture
def echo_server():
    fixture = Fixture(match_key="What is 1+1?", body="two")
    server = MockTeacherServer([fixture]).start()
    yield server
    server.stop()


class TestPromptBuilding:
    def test_contains_both_pattern_sections_and_json_format(self):
        prompt = build_double_pattern_prompt(PROBLEM)
        assert "Pattern A:" in prompt
        assert "Pattern B:" in prompt
        assert '"chosen_pattern": "A or B"' in prompt
        assert "pure JSON" in prompt
        assert "What is 1+1?" in prompt
        assert "<the math problem here>" not in prompt

    def test_empty_statement_rejected(self):
        bare = Problem(id="x", statement=" ")
        with pytest.raises(ValueError):
            build_double_pattern_prompt(bare)

    def test_prompts_differ_only_in_the_statement(self):
        a = build_double_pattern_prompt(Problem(id="a", statement="AAAA"))
        b = build_double_pattern_prompt(Problem(id="b", statement="BBBB"))
        assert a.replace("AAAA", "BBBB") == b

    def test_template_is_loaded_from_the_repo_asset(self):
        asset = Path(__file__).parent.parent / "src" / "tirforge" / "assets" / "double_pattern_prompt.txt"
        template = asset.read_text(encoding="utf-8")
        assert "<the math problem here>" in template
        assert build_double_pattern_prompt(PROBLEM) == template.replace(
            "<the math problem here>", PROBLEM.statement
        )

    def test_judge_prompt_asks_for_single_letter(self):
        prompt = build_pattern_judge_prompt(PROBLEM)
        assert "A or B" in prompt
        assert PROBLEM.statement in prompt


class TestJudgmentExtraction:
    def test_fixture_corpus(self, fixtures_dir):
        cases = [
            json.loads(line)
            for line in (fixtures_dir / "judge" / "cases.jsonl").read_text().splitlines()
            if line.strip()
        ]
        assert len(cases) >= 10
        for case in cases:
            if case["expected"] is None:
                with pytest.raises(UnparseableJudgment):
                    extract_pattern_judgment(case["reply"])
            else:
                assert extract_pattern_judgment(case["reply"]) is PatternLabel(case["expected"])

    def test_single_letters(self):
        assert extract_pattern_judgment("A") is PatternLabel.A
        assert extract_pattern_judgment("B") is PatternLabel.B

    def test_pattern_phrase(self):
        assert extract_pattern_judgment("Pattern B is more appropriate.") is PatternLabel.B

    def test_unparseable(self):
        with pytest.raises(UnparseableJudgment):
            extract_pattern_judgment("maybe")


class TestCacheStore:
    def test_key_is_deterministic_and_input_sensitive(self):
        key = CacheStore.key_for("prompt", "model", 0.0)
        assert key == CacheStore.key_for("prompt", "model", 0.0)
        assert key != CacheStore.key_for("prompt2", "model", 0.0)
        assert key != CacheStore.key_for("prompt", "model2", 0.0)
        assert key != CacheStore.key_for("prompt", "model", 0.5)

    def test_layout_two_level_directory(self, tmp_path):
        store = CacheStore(tmp_path)
        key = CacheStore.key_for("p", "m", 0.0)
        store.put(key, "raw value")
        assert (tmp_path / key[:2] / f"{key}.json").exists()
        assert store.get(key) == "raw value"

    def test_miss_returns_none(self, tmp_path):
        assert CacheStore(tmp_path).get("0" * 64) is None


class TestClientAgainstMockServer:
    def test_basic_round_trip(self, echo_server, tmp_path):
        client = TeacherClient(make_config(echo_server.base_url), CacheStore(tmp_path))
        assert client.request_solution(PROBLEM) == "two"
        assert client.stats.requests == 1

    def test_cache_hit_makes_no_network_call(self, echo_server, tmp_path):
        client = TeacherClient(make_config(echo_server.base_url), CacheStore(tmp_path))
        first = client.request_solution(PROBLEM)
        second = client.request_solution(PROBLEM)
        assert first == second == "two"
        assert client.stats.requests == 1
        assert client.stats.cache_hits == 1
        assert echo_server.request_counts["What is 1+1?"] == 1

    def test_two_429s_then_success_records_two_retries(self, tmp_path):
        fixture = Fixture(match_key="What is 1+1?", body="two", fail_script=[429, 429])
        with MockTeacherServer([fixture]) as server:
            client = TeacherClient(make_config(server.base_url), CacheStore(tmp_path))
            assert client.request_solution(PROBLEM) == "two"
            assert client.stats.retries == 2
            assert server.request_counts["What is 1+1?"] == 3

    def test_retries_exhausted(self):
        fixture = Fixture(match_key="What is 1+1?", body="two", fail_script=[500] * 5)
        with MockTeacherServer([fixture]) as server:
            client = TeacherClient(make_config(server.base_url, max_retries=2))
            with pytest.raises(ExhaustedRetries):
                client.request_solution(PROBLEM)
            assert server.request_counts["What is 1+1?"] == 3

    def test_401_fails_immediately_without_retry(self):
        fixture = Fixture(match_key="What is 1+1?", body="two", fail_script=[401])
        with MockTeacherServer([fixture]) as server:
            client = TeacherClient(make_config(server.base_url))
            with pytest.raises(AuthFailure):
                client.request_solution(PROBLEM)
            assert server.request_counts["What is 1+1?"] == 1

    def test_missing_api_key_is_auth_failure_before_any_network(self, echo_server):
        client = TeacherClient(make_config(echo_server.base_url, api_key=""))
        with pytest.raises(AuthFailure):
            client.request_solution(PROBLEM)
        assert client.stats.requests == 0

    def test_judge_pattern_end_to_end(self, tmp_path):
        fixture = Fixture(match_key="What is 1+1?", body="Pattern B, a single sum.")
        with MockTeacherServer([fixture]) as server:
            client = TeacherClient(make_config(server.base_url), CacheStore(tmp_path))
            assert client.judge_pattern(PROBLEM) is PatternLabel.B

    def test_concurrency_never_exceeds_the_configured_bound(self):
        fixture = Fixture(match_key="What is 1+1?", body="two")
        with MockTeacherServer([fixture], response_delay_s=0.02) as server:
            client = TeacherClient(make_config(server.base_url, max_concurrency=4))
            threads = [
                threading.Thread(target=client.request_solution, args=(PROBLEM,))
                for _ in range(50)
            ]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            assert server.request_counts["What is 1+1?"] == 50
            assert server.peak_in_flight <= 4


class TestBackoff:
    def test_delays_are_nondecreasing(self):
        delays = TeacherClient.retry_delays(0.5, 8)
        assert delays == sorted(delays)
        assert len(delays) == 8

    def test_delays_are_capped(self):
        assert max(TeacherClient.retry_delays(1.0, 12)) == 30.0

    def test_exponential_shape(self):
        assert TeacherClient.retry_delays(0.5, 3) == [0.5, 1.0, 2.0]


class TestEndpointConfig:
    def test_rejects_bad_url(self):
        with pytest.raises(ValueError):
            EndpointConfig(base_url="not a url", model_name="m")

    def test_rejects_zero_concurrency(self):
        with pytest.raises(ValueError):
            EndpointConfig(base_url="http://localhost:1", model_name="m", max_concurrency=0)

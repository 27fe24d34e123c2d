import json
import math

import pytest

import posh.judge as judge_mod
from posh.errors import JudgeUnavailable, NoDigitToken
from posh.judge import (
    HashMockJudge,
    HttpJudge,
    JudgeConfig,
    ScoreDistribution,
    VerbatimOracleJudge,
    distribution_from_response,
    judge_from_url,
)
from posh.rubric import RubricQuestion


def question(prompt="Is it there?"):
    return RubricQuestion(
        question_id="q0", component_id="o0", kind="entity", pass_index=1, prompt=prompt, direction="mistake"
    )


def chat_response(positions, text="1"):
    """positions: list of (chosen_token, {alt_token: logprob})."""
    content = [
        {
            "token": chosen,
            "logprob": alts.get(chosen, -1.0),
            "top_logprobs": [{"token": t, "logprob": lp} for t, lp in alts.items()],
        }
        for chosen, alts in positions
    ]
    return {"choices": [{"message": {"content": text}, "logprobs": {"content": content}}]}


# ---------------------------------------------------------------------------
# distributions


def test_expected_score_weighted_average():
    dist = ScoreDistribution.from_weights({1: 0.7, 5: 0.3})
    assert math.isclose(dist.expected, 0.7 * 1 + 0.3 * 5)
    assert math.isclose(sum(dist.masses.values()), 1.0)


def test_uniform_mass_gives_three():
    dist = ScoreDistribution.from_weights({d: 1.0 for d in range(1, 6)})
    assert math.isclose(dist.expected, 3.0)


def test_masses_renormalized_over_digits_only():
    response = chat_response([("1", {"1": math.log(0.35), "5": math.log(0.15), "no": math.log(0.5)})])
    dist = distribution_from_response(response)
    assert math.isclose(dist.masses[1], 0.7)
    assert math.isclose(dist.masses[5], 0.3)
    assert math.isclose(dist.expected, 2.2)


def test_first_digit_bearing_position_wins():
    # Reasoning-style models may emit whitespace or words first.
    response = chat_response(
        [
            ("\n", {"\n": math.log(0.9), "the": math.log(0.1)}),
            (" 4", {" 4": math.log(0.6), "4": math.log(0.2), " 5": math.log(0.2)}),
        ]
    )
    dist = distribution_from_response(response)
    assert math.isclose(dist.masses[4], 0.8)
    assert math.isclose(dist.masses[5], 0.2)
    assert dist.top_token == " 4"


def test_fallback_parses_completion_text():
    response = {"choices": [{"message": {"content": "4"}, "logprobs": None}]}
    dist = distribution_from_response(response)
    assert dist.expected == 4.0
    assert dist.masses[4] == 1.0


def test_no_digit_anywhere_raises():
    response = {"choices": [{"message": {"content": "absent"}, "logprobs": None}]}
    with pytest.raises(NoDigitToken):
        distribution_from_response(response)


def test_legacy_completions_format():
    response = {
        "choices": [
            {
                "text": "3",
                "logprobs": {
                    "tokens": ["3"],
                    "token_logprobs": [math.log(0.5)],
                    "top_logprobs": [{"3": math.log(0.5), "2": math.log(0.5)}],
                },
            }
        ]
    }
    dist = distribution_from_response(response)
    assert math.isclose(dist.expected, 2.5)


def test_expected_monotone_in_higher_digit_mass():
    lows = ScoreDistribution.from_weights({2: 0.8, 4: 0.2})
    highs = ScoreDistribution.from_weights({2: 0.2, 4: 0.8})
    assert highs.expected > lows.expected


def test_config_validation():
    with pytest.raises(ValueError):
        JudgeConfig(url="http://x", concurrency=0)
    with pytest.raises(ValueError):
        JudgeConfig(url="http://x", top_logprobs=4)


# ---------------------------------------------------------------------------
# HTTP judge with caching


class FakeReply:
    def __init__(self, payload, status=200):
        self._payload = payload
        self.status_code = status

    def raise_for_status(self):
        if self.status_code >= 400:
            raise judge_mod.requests.HTTPError(f"status {self.status_code}")

    def json(self):
        return self._payload


@pytest.fixture
def http_judge(tmp_path, monkeypatch):
    calls = []

    def fake_post(url, json=None, headers=None, timeout=None):
        calls.append({"url": url, "payload": json})
        return FakeReply(chat_response([("5", {"5": math.log(0.9), "1": math.log(0.1)})], text="5"))

    monkeypatch.setattr(judge_mod.requests, "post", fake_post)
    config = JudgeConfig(url="http://judge.local", model="m", cache_dir=str(tmp_path / "cache"))
    return HttpJudge(config), calls


def test_http_judge_caches_responses(http_judge):
    judge, calls = http_judge
    first = judge.score_presence(question())
    assert len(calls) == 1
    second = judge.score_presence(question())
    assert len(calls) == 1  # served from cache
    assert first == second
    assert judge.stats["cache_hits"] == 1


def test_cache_key_distinguishes_prompts(http_judge):
    judge, calls = http_judge
    judge.score_presence(question("prompt one"))
    judge.score_presence(question("prompt two"))
    assert len(calls) == 2


def test_corrupted_cache_entry_refetched(http_judge, tmp_path):
    judge, calls = http_judge
    judge.score_presence(question())
    cache_files = list((tmp_path / "cache").glob("*.json"))
    assert len(cache_files) == 1
    cache_files[0].write_text("{not json", encoding="utf-8")
    judge.score_presence(question())
    assert len(calls) == 2


def test_flush_cache_removes_entries(http_judge, tmp_path):
    judge, calls = http_judge
    judge.score_presence(question())
    assert judge.flush_cache() == 1
    judge.score_presence(question())
    assert len(calls) == 2


def test_warm_cache_twice_hits_cache(http_judge):
    judge, calls = http_judge
    prompts = ["p1", "p2", "p3"]
    stats = judge.warm_cache(prompts)
    assert stats == {"prompts": 3, "requests": 3, "cache_hits": 0}
    stats = judge.warm_cache(prompts)
    assert stats == {"prompts": 3, "requests": 0, "cache_hits": 3}
    assert len(calls) == 3


def test_warm_cache_empty_plan(http_judge):
    judge, calls = http_judge
    assert judge.warm_cache([]) == {"prompts": 0, "requests": 0, "cache_hits": 0}
    assert calls == []


def test_judge_unavailable_after_retries(tmp_path, monkeypatch):
    attempts = []

    def failing_post(url, json=None, headers=None, timeout=None):
        attempts.append(url)
        raise judge_mod.requests.ConnectionError("refused")

    monkeypatch.setattr(judge_mod.requests, "post", failing_post)
    monkeypatch.setattr(judge_mod.time, "sleep", lambda s: None)
    judge = HttpJudge(JudgeConfig(url="http://judge.local", max_retries=2))
    with pytest.raises(JudgeUnavailable):
        judge.score_presence(question())
    assert len(attempts) == 3


def test_rewrite_strips_to_first_nonempty_line(tmp_path, monkeypatch):
    def fake_post(url, json=None, headers=None, timeout=None):
        return FakeReply({"choices": [{"message": {"content": '\n  "the small dog"  \nsecond line'}}]})

    monkeypatch.setattr(judge_mod.requests, "post", fake_post)
    judge = HttpJudge(JudgeConfig(url="http://judge.local"))
    assert judge.rewrite("Rewrite ...") == "the small dog"


def test_chat_endpoint_path(monkeypatch):
    seen = {}

    def fake_post(url, json=None, headers=None, timeout=None):
        seen["url"] = url
        seen["payload"] = json
        return FakeReply(chat_response([("3", {"3": 0.0})]))

    monkeypatch.setattr(judge_mod.requests, "post", fake_post)
    judge = HttpJudge(JudgeConfig(url="http://judge.local", model="m7"))
    judge.score_presence(question())
    assert seen["url"] == "http://judge.local/v1/chat/completions"
    assert seen["payload"]["temperature"] == 0.0
    assert seen["payload"]["top_logprobs"] == 20
    assert seen["payload"]["seed"] == 0


# ---------------------------------------------------------------------------
# stubs and factory


def test_verbatim_oracle_scores():
    judge = VerbatimOracleJudge()
    hit = judge.score_presence(question(), component_text="small dog", target_text="a small dog sleeps")
    miss = judge.score_presence(question(), component_text="red hat", target_text="a small dog sleeps")
    assert hit.expected == 5.0
    assert miss.expected == 1.0


def test_hash_mock_judge_deterministic():
    a = HashMockJudge(seed=7).score_presence(question("same prompt"))
    b = HashMockJudge(seed=7).score_presence(question("same prompt"))
    c = HashMockJudge(seed=8).score_presence(question("same prompt"))
    assert a == b
    assert a != c
    assert 1.0 <= a.expected <= 5.0


def test_judge_from_url_dispatch(tmp_path):
    assert isinstance(judge_from_url("verbatim:"), VerbatimOracleJudge)
    assert isinstance(judge_from_url("mock:42"), HashMockJudge)
    assert judge_from_url("mock:42").seed == 42
    assert isinstance(judge_from_url("http://x", cache_dir=str(tmp_path)), HttpJudge)

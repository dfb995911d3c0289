import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from decompeval.gateway import (
    ChatExchange,
    ContextOverflowError,
    ExtractionError,
    Gateway,
    GatewayError,
    ModelConfig,
    ReplayConflictError,
    ReplayMissError,
    ReplayStore,
    SchemaValidationError,
    ScriptedClient,
    UsageRecord,
    aggregate_usage,
    exchange_key,
    extract_json,
)
from decompeval.readability import ALL_SUBDIMENSIONS

MESSAGES = [("system", "be terse"), ("user", "say hi")]


def make_recording_gateway(tmp_path, fn):
    store = ReplayStore(tmp_path / "exchanges")
    return Gateway(store, client=ScriptedClient(fn), mode="record"), store


def test_record_then_replay_is_verbatim(tmp_path):
    gw, store = make_recording_gateway(tmp_path, lambda cfg, msgs: "hello there")
    config = ModelConfig(model_id="m1")
    recorded = gw.complete(config, MESSAGES)
    replay = Gateway(store, mode="replay")
    replayed = replay.complete(config, MESSAGES)
    assert replayed.response_text == recorded.response_text == "hello there"
    assert replayed.key == recorded.key == exchange_key("m1", MESSAGES)


def test_replay_miss_raises(tmp_path):
    replay = Gateway(ReplayStore(tmp_path / "exchanges"), mode="replay")
    with pytest.raises(ReplayMissError):
        replay.complete(ModelConfig(model_id="m1"), MESSAGES)


def test_empty_message_list_is_a_precondition_error(tmp_path):
    gw, _ = make_recording_gateway(tmp_path, lambda cfg, msgs: "x")
    with pytest.raises(ValueError):
        gw.complete(ModelConfig(model_id="m1"), [])


def test_context_overflow_guard_fires_before_transport(tmp_path):
    calls = []

    def fn(cfg, msgs):
        calls.append(1)
        return "x"

    gw, _ = make_recording_gateway(tmp_path, fn)
    config = ModelConfig(model_id="m1", max_context_hint=10)
    with pytest.raises(ContextOverflowError):
        gw.complete(config, [("user", "word " * 500)])
    assert calls == []


def test_transport_retries_then_succeeds(tmp_path):
    attempts = []

    def flaky(cfg, msgs):
        attempts.append(1)
        if len(attempts) < 3:
            raise ConnectionError("transient")
        return "finally"

    store = ReplayStore(tmp_path / "exchanges")
    gw = Gateway(store, client=ScriptedClient(flaky), mode="record", backoff_s=0.0)
    exchange = gw.complete(ModelConfig(model_id="m1"), MESSAGES)
    assert exchange.response_text == "finally"
    assert len(attempts) == 3


def test_transport_exhaustion_carries_last_cause(tmp_path):
    def broken(cfg, msgs):
        raise ConnectionError("unreachable endpoint")

    store = ReplayStore(tmp_path / "exchanges")
    gw = Gateway(store, client=ScriptedClient(broken), mode="record", backoff_s=0.0)
    with pytest.raises(GatewayError, match="unreachable endpoint"):
        gw.complete(ModelConfig(model_id="m1"), MESSAGES)


def test_store_conflict_is_detected(tmp_path):
    store = ReplayStore(tmp_path / "exchanges")
    usage = UsageRecord(1, 1, 1)
    key = exchange_key("m1", MESSAGES)
    store.put(ChatExchange(tuple(MESSAGES), "first", usage, key))
    store.put(ChatExchange(tuple(MESSAGES), "first", usage, key))  # identical is fine
    with pytest.raises(ReplayConflictError):
        store.put(ChatExchange(tuple(MESSAGES), "second", usage, key))


def test_resume_never_reinvokes_for_persisted_exchange(tmp_path):
    calls = []

    def fn(cfg, msgs):
        calls.append(1)
        return "once"

    gw, store = make_recording_gateway(tmp_path, fn)
    config = ModelConfig(model_id="m1")
    gw.complete(config, MESSAGES)
    gw.complete(config, MESSAGES)
    assert len(calls) == 1


def scorecard_text(**overrides):
    scores = {name: 7 for name in ALL_SUBDIMENSIONS}
    scores.update(overrides)
    return json.dumps({"sub_scores": scores})


def test_extract_json_from_fenced_block():
    text = "Here is my verdict:\n```json\n" + scorecard_text() + "\n```\nDone."
    parsed = extract_json(text, "uraf-scorecard")
    assert parsed["sub_scores"]["variable_naming"] == 7


def test_extract_json_no_braces_is_extraction_error():
    with pytest.raises(ExtractionError):
        extract_json("no json here at all", "uraf-scorecard")


def test_extract_json_missing_subdimension_names_it():
    scores = {name: 7 for name in ALL_SUBDIMENSIONS if name != "type_precision"}
    with pytest.raises(SchemaValidationError, match="type_precision"):
        extract_json(json.dumps({"sub_scores": scores}), "uraf-scorecard")


def test_extract_json_skips_non_matching_objects():
    text = '{"noise": 1} and then ' + scorecard_text()
    parsed = extract_json(text, "uraf-scorecard")
    assert "sub_scores" in parsed


def test_extract_json_is_idempotent():
    parsed = extract_json(scorecard_text(), "uraf-scorecard")
    again = extract_json(json.dumps(parsed), "uraf-scorecard")
    assert again == parsed


def test_repair_edits_schema():
    parsed = extract_json('{"edits": []}', "repair-edits")
    assert parsed["edits"] == []
    with pytest.raises(SchemaValidationError, match="edits"):
        extract_json('{"changes": []}', "repair-edits")


def exchange(prompt, completion, wall):
    return ChatExchange(
        request_messages=(("user", "x"),),
        response_text="y",
        usage=UsageRecord(prompt, completion, wall),
    )


def test_aggregate_usage_single_exchange():
    summary = aggregate_usage([[exchange(1000, 500, 2000)]])
    assert summary.total_tokens == 1500
    assert summary.avg_tokens == 1500
    assert summary.median_tokens == 1500
    assert summary.avg_time_ms == 2000


def test_aggregate_usage_even_count_uses_lower_median():
    summary = aggregate_usage([[exchange(100, 0, 10)], [exchange(300, 0, 30)]])
    assert summary.avg_tokens == 200
    assert summary.median_tokens == 100


def test_aggregate_usage_empty_stage_is_zero():
    summary = aggregate_usage([])
    assert summary.total_tokens == 0
    assert summary.avg_tokens == 0.0


@settings(max_examples=100, deadline=None)
@given(
    st.lists(
        st.lists(
            st.tuples(st.integers(0, 10_000), st.integers(0, 10_000), st.integers(0, 10_000)),
            min_size=1,
            max_size=4,
        ),
        min_size=1,
        max_size=6,
    )
)
def test_aggregate_usage_conserves_totals(tasks):
    stage = [[exchange(p, c, w) for p, c, w in task] for task in tasks]
    summary = aggregate_usage(stage)
    assert summary.total_tokens == sum(p + c for task in tasks for p, c, _ in task)


def test_usage_record_rejects_negatives():
    with pytest.raises(ValueError):
        UsageRecord(-1, 0, 0)

"""
Tests for the prediction service.
"""

import pytest

from src.data.llm_client import TransportResponse
from src.data.replay_cache import ReplayCache
from src.models.data_models import PredictionSet
from src.models.errors import CacheMiss, ConfigError, EmptyInput, IoFailure
from src.services.prediction_service import (
    PredictionService,
    RunMode,
    make_batches,
    sort_predictions,
)
from src.services.prompt_service import SHOT_POOL, make_prompt_spec
from tests.conftest import FakeTransport, count_queries, make_entry, no_sleep


def dataset(n):
    return [make_entry(i + 1) for i in range(n)]


def service(providers, cache, mode, transport=None, environ=None):
    return PredictionService(
        providers,
        cache,
        mode=mode,
        transport=transport,
        max_attempts=2,
        backoff_base=0.0,
        sleep=no_sleep,
        environ=environ,
    )


class FailingProvider(FakeTransport):
    """Answers every provider except one, which always gets HTTP 500."""

    def __init__(self, failing_model):
        super().__init__()
        self.failing_model = failing_model

    async def post(self, url, headers, payload, timeout):
        self.requests.append({"url": url, "payload": payload})
        if payload["model"] == self.failing_model:
            return TransportResponse(status=500, body="boom")
        return self.answer_all(payload)


class TestBatching:
    """Test cases for batch helpers."""

    def test_make_batches(self):
        """Test that batches keep order and the last one holds the remainder."""
        batches = make_batches(dataset(45), 20)

        assert [len(batch) for batch in batches] == [20, 20, 5]
        assert batches[2][0].cve_id == "CVE-2021-0041"

    def test_sort_predictions(self):
        """Test the (cve_id, model_id) row order."""
        rows = [
            PredictionSet.all_unknown("CVE-2021-10000", "a"),
            PredictionSet.all_unknown("CVE-2021-9999", "b"),
            PredictionSet.all_unknown("CVE-2021-9999", "a"),
        ]

        ordered = sort_predictions(rows)

        assert [(p.cve_id, p.model_id) for p in ordered] == [
            ("CVE-2021-9999", "a"), ("CVE-2021-9999", "b"), ("CVE-2021-10000", "a")
        ]


class TestPredictionService:
    """Test cases for PredictionService."""

    @pytest.mark.asyncio
    async def test_live_batches_per_provider(self, provider, second_provider, environ, tmp_path):
        """Test that 40 entries with batch size 20 send two prompts per provider."""
        transport = FakeTransport()
        svc = service([provider, second_provider], ReplayCache(tmp_path / "c.jsonl"), RunMode.LIVE, transport, environ)

        run = await svc.run_predictions(dataset(40), make_prompt_spec(2, 20))

        assert len(transport.requests) == 4
        assert all(count_queries(r["payload"]["messages"][1]["content"]) == 20 for r in transport.requests)
        assert len(run.predictions) == 80
        assert all(p.valid for p in run.predictions)
        assert run.failed_providers == []
        assert run.summaries["model-a"].requests_sent == 2
        # live mode does not write the cache
        assert not (tmp_path / "c.jsonl").exists()

    @pytest.mark.asyncio
    async def test_record_then_replay(self, provider, environ, tmp_path):
        """Test that replay reproduces a recorded run without any request."""
        cache_path = tmp_path / "c.jsonl"
        spec = make_prompt_spec(5, 7)
        entries = dataset(30)

        recorded = await service([provider], ReplayCache(cache_path), RunMode.RECORD, FakeTransport(), environ) \
            .run_predictions(entries, spec)

        replay_transport = FakeTransport()
        replayed = await service([provider], ReplayCache(cache_path), RunMode.REPLAY, replay_transport) \
            .run_predictions(entries, spec)

        assert replayed.predictions == recorded.predictions
        assert replay_transport.requests == []
        assert replayed.summaries["model-a"].cache_hits == 5

    @pytest.mark.asyncio
    async def test_replay_miss_lists_every_key(self, provider, second_provider, tmp_path):
        """Test that replay without a cache reports all missing prompts."""
        svc = service([provider, second_provider], ReplayCache(tmp_path / "empty.jsonl"), RunMode.REPLAY)

        with pytest.raises(CacheMiss) as info:
            await svc.run_predictions(dataset(25), make_prompt_spec(0, 10))

        keys = info.value.missing_keys
        assert len(keys) == 6
        assert sum(key.startswith("model-a:") for key in keys) == 3
        assert keys == sorted(keys)

    @pytest.mark.asyncio
    async def test_failing_provider_keeps_others(self, provider, second_provider, environ, tmp_path):
        """Test that one failed provider does not stop the other."""
        transport = FailingProvider(second_provider.model_name)
        svc = service([provider, second_provider], ReplayCache(tmp_path / "c.jsonl"), RunMode.LIVE, transport, environ)

        run = await svc.run_predictions(dataset(10), make_prompt_spec(0, 5))

        assert run.failed_providers == ["model-b"]
        assert "HTTP 500" in run.summaries["model-b"].error
        assert {p.model_id for p in run.predictions} == {"model-a"}
        assert len(run.predictions) == 10

    @pytest.mark.asyncio
    async def test_cache_write_failure_keeps_others(self, provider, second_provider, environ, tmp_path):
        """Test that a failed cache write aborts only the provider that hit it."""
        cache = ReplayCache(tmp_path / "c.jsonl")
        original_put = cache.put

        async def put(key, response):
            if key.startswith("model-b:"):
                raise IoFailure("Cannot write replay cache: disk full")
            await original_put(key, response)

        cache.put = put
        svc = service([provider, second_provider], cache, RunMode.RECORD, FakeTransport(), environ)

        run = await svc.run_predictions(dataset(10), make_prompt_spec(0, 5))

        assert run.failed_providers == ["model-b"]
        assert "disk full" in run.summaries["model-b"].error
        assert {p.model_id for p in run.predictions} == {"model-a"}
        assert len(run.predictions) == 10

    @pytest.mark.asyncio
    async def test_missing_credential_fails_provider(self, provider, tmp_path):
        """Test that a provider without its credential is marked failed."""
        svc = service([provider], ReplayCache(tmp_path / "c.jsonl"), RunMode.LIVE, FakeTransport(), {})

        run = await svc.run_predictions(dataset(3), make_prompt_spec(0, 5))

        assert run.failed_providers == ["model-a"]
        assert run.predictions == []

    @pytest.mark.asyncio
    async def test_short_response_gives_unknown_rows(self, provider, environ, tmp_path):
        """Test that missing answer lines become all-UNKNOWN predictions."""
        transport = FakeTransport(lambda payload: FakeTransport.ok("LOW | NETWORK | NONE | NONE | UNCHANGED | HIGH | HIGH | HIGH"))
        svc = service([provider], ReplayCache(tmp_path / "c.jsonl"), RunMode.LIVE, transport, environ)

        run = await svc.run_predictions(dataset(3), make_prompt_spec(0, 3))

        assert [p.valid for p in run.predictions] == [True, False, False]

    @pytest.mark.asyncio
    async def test_empty_dataset(self, provider, tmp_path):
        """Test predicting nothing."""
        svc = service([provider], ReplayCache(tmp_path / "c.jsonl"), RunMode.REPLAY)

        with pytest.raises(EmptyInput):
            await svc.run_predictions([], make_prompt_spec(0, 5))

    @pytest.mark.asyncio
    async def test_shot_leak(self, provider, tmp_path):
        """Test that a worked example taken from the dataset is refused."""
        leaked = make_entry(1, description=SHOT_POOL[0].description)
        svc = service([provider], ReplayCache(tmp_path / "c.jsonl"), RunMode.REPLAY)

        with pytest.raises(ConfigError, match="must not be drawn"):
            await svc.run_predictions([leaked], make_prompt_spec(2, 5))

    def test_no_providers(self, tmp_path):
        """Test that a provider list is required."""
        with pytest.raises(ConfigError):
            PredictionService([], ReplayCache(tmp_path / "c.jsonl"))


if __name__ == "__main__":
    pytest.main([__file__])

"""
Prediction service for collecting per-model metric predictions.

Splits the dataset into prompt batches, submits them to every configured
provider (live, record or replay mode) and assembles the prediction table.
"""

import asyncio
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from src.data.llm_client import AiohttpTransport, ChatCompletionClient, ChatTransport, SleepFn
from src.data.replay_cache import ReplayCache, make_cache_key
from src.models.data_models import (
    CveEntry,
    PredictionSet,
    PromptSpec,
    ProviderConfig,
    cve_sort_key,
)
from src.models.errors import CacheMiss, ConfigError, EmptyInput, IoFailure, ProviderFailure
from src.services.prompt_service import Prompt, ResponseParser, build_prompt
from src.utils.logger import LoggerMixin


class RunMode(str, Enum):
    """How provider responses are obtained."""

    LIVE = "live"
    REPLAY = "replay"
    RECORD = "record"


@dataclass
class ProviderRunSummary:
    """Bookkeeping for one provider over one run."""

    provider_id: str
    batches: int = 0
    completed: int = 0
    requests_sent: int = 0
    cache_hits: int = 0
    error: Optional[str] = None
    missing_keys: List[str] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class PredictionRun:
    """Prediction rows plus per-provider summaries."""

    predictions: List[PredictionSet]
    summaries: Dict[str, ProviderRunSummary]

    @property
    def failed_providers(self) -> List[str]:
        return sorted(pid for pid, summary in self.summaries.items() if summary.failed)


def make_batches(entries: Sequence[CveEntry], batch_size: int) -> List[List[CveEntry]]:
    return [list(entries[i:i + batch_size]) for i in range(0, len(entries), batch_size)]


def sort_predictions(predictions: Sequence[PredictionSet]) -> List[PredictionSet]:
    return sorted(predictions, key=lambda p: (cve_sort_key(p.cve_id), p.model_id))


class PredictionService(LoggerMixin):
    """
    Runs the prediction pipeline for a set of providers.

    Providers run concurrently, each with at most max_parallel requests in
    flight. A provider that fails, or whose responses cannot be written to
    the replay cache, is aborted; its finished batches are kept.
    """

    def __init__(
        self,
        providers: Sequence[ProviderConfig],
        cache: ReplayCache,
        mode: RunMode = RunMode.REPLAY,
        transport: Optional[ChatTransport] = None,
        max_attempts: int = 5,
        backoff_base: float = 1.0,
        request_timeout: float = 120.0,
        sleep: SleepFn = asyncio.sleep,
        environ: Optional[Mapping[str, str]] = None
    ):
        if not providers:
            raise ConfigError("At least one provider is required")
        self.providers = list(providers)
        self.cache = cache
        self.mode = RunMode(mode)
        self.transport = transport
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.request_timeout = request_timeout
        self._sleep = sleep
        self._environ = environ
        self.parser = ResponseParser()

    def _client(self, provider: ProviderConfig, transport: ChatTransport) -> ChatCompletionClient:
        return ChatCompletionClient(
            provider,
            transport,
            max_attempts=self.max_attempts,
            backoff_base=self.backoff_base,
            request_timeout=self.request_timeout,
            sleep=self._sleep,
            environ=self._environ,
        )

    async def submit_batch(
        self,
        provider: ProviderConfig,
        prompt: Prompt,
        client: Optional[ChatCompletionClient] = None,
        summary: Optional[ProviderRunSummary] = None
    ) -> str:
        """
        Obtain the raw response for one prompt.

        Replay reads the cache only; record and live send one request, and
        record also appends the response to the cache.

        Raises:
            CacheMiss: Replay mode and the prompt is not cached
            ProviderFailure: The request failed for good
        """
        key = make_cache_key(provider.provider_id, prompt.text)

        if self.mode is RunMode.REPLAY:
            cached = self.cache.get(key)
            if cached is None:
                raise CacheMiss("Replay cache has no response", [key])
            if summary:
                summary.cache_hits += 1
            return cached

        if client is None:
            raise ConfigError(f"{self.mode.value} mode needs a provider client")

        response = await client.complete(prompt.system, prompt.user)
        if summary:
            summary.requests_sent += 1

        if self.mode is RunMode.RECORD:
            await self.cache.put(key, response)
        return response

    async def _run_provider(
        self,
        provider: ProviderConfig,
        batches: List[List[CveEntry]],
        prompts: List[Prompt],
        transport: Optional[ChatTransport]
    ) -> Tuple[List[PredictionSet], ProviderRunSummary]:
        summary = ProviderRunSummary(provider_id=provider.provider_id, batches=len(batches))
        client = self._client(provider, transport) if transport is not None else None
        semaphore = asyncio.Semaphore(provider.max_parallel)
        results: Dict[int, List[PredictionSet]] = {}
        aborted = asyncio.Event()

        async def run_one(index: int) -> None:
            async with semaphore:
                if aborted.is_set():
                    return
                batch = batches[index]
                try:
                    raw = await self.submit_batch(provider, prompts[index], client, summary)
                except CacheMiss as e:
                    summary.missing_keys.extend(e.missing_keys)
                    return
                except (ProviderFailure, IoFailure) as e:
                    if not aborted.is_set():
                        aborted.set()
                        summary.error = str(e)
                        self.logger.error(
                            "Provider aborted",
                            provider=provider.provider_id,
                            batch=index,
                            error=str(e)
                        )
                    return
                results[index] = self.parser.parse(
                    raw, [entry.cve_id for entry in batch], provider.provider_id
                )
                summary.completed += 1
                self.logger.info(
                    "Batch completed",
                    provider=provider.provider_id,
                    batch=index,
                    size=len(batch)
                )

        await asyncio.gather(*(run_one(index) for index in range(len(batches))))

        predictions = [p for index in sorted(results) for p in results[index]]
        return predictions, summary

    async def run_predictions(self, dataset: Sequence[CveEntry], spec: PromptSpec) -> PredictionRun:
        """
        Predict every dataset entry with every provider.

        Args:
            dataset: Entries to predict
            spec: Prompt settings

        Returns:
            PredictionRun with rows sorted by (cve_id, model_id)

        Raises:
            EmptyInput: If the dataset is empty
            ConfigError: If a shot example is also a dataset description
            CacheMiss: Replay mode with uncached prompts; lists every missing key
        """
        if not dataset:
            raise EmptyInput("Dataset is empty")

        descriptions = {entry.description.strip() for entry in dataset}
        leaked = [ex for ex in spec.shot_examples if ex.description.strip() in descriptions]
        if leaked:
            raise ConfigError("Shot examples must not be drawn from the evaluation set")

        ordered = sorted(dataset, key=lambda entry: cve_sort_key(entry.cve_id))
        batches = make_batches(ordered, spec.batch_size)
        prompts = [build_prompt([entry.description for entry in batch], spec) for batch in batches]

        self.logger.info(
            "Starting predictions",
            mode=self.mode.value,
            entries=len(ordered),
            batches=len(batches),
            providers=[p.provider_id for p in self.providers],
            shots=spec.shots
        )

        owned_transport: Optional[AiohttpTransport] = None
        transport = self.transport
        if self.mode is not RunMode.REPLAY and transport is None:
            owned_transport = AiohttpTransport()
            transport = owned_transport

        try:
            outcomes = await asyncio.gather(*(
                self._run_provider(
                    provider,
                    batches,
                    prompts,
                    transport if self.mode is not RunMode.REPLAY else None
                )
                for provider in self.providers
            ))
        finally:
            if owned_transport is not None:
                await owned_transport.close()

        predictions: List[PredictionSet] = []
        summaries: Dict[str, ProviderRunSummary] = {}
        for provider_predictions, summary in outcomes:
            predictions.extend(provider_predictions)
            summaries[summary.provider_id] = summary

        missing = sorted({key for summary in summaries.values() for key in summary.missing_keys})
        if missing:
            self.logger.error("Replay cache misses", count=len(missing))
            raise CacheMiss(f"{len(missing)} prompt(s) missing from the replay cache", missing)

        run = PredictionRun(predictions=sort_predictions(predictions), summaries=summaries)
        self.logger.info(
            "Predictions finished",
            rows=len(run.predictions),
            failed_providers=run.failed_providers
        )
        return run

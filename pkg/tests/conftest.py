"""
Shared fixtures and builders for the test suite.
"""

import json
import re
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
import pytest

from src.data.llm_client import TransportResponse
from src.models.cvss import METRIC_VALUES, BaseVector, MetricKind, parse_vector_string
from src.models.data_models import CveEntry, PredictionSet, ProviderConfig
from src.utils.config import AppConfig

FIXTURES = Path(__file__).parent / "fixtures"

_QUERY_LINE = re.compile(r"^Description \d+: ", re.MULTILINE)

DEFAULT_ANSWER = "LOW | NETWORK | NONE | NONE | UNCHANGED | HIGH | HIGH | HIGH"


def vector(text: str) -> BaseVector:
    """BaseVector from a vector string, with or without the CVSS:3.1/ prefix."""
    if not text.startswith("CVSS:"):
        text = "CVSS:3.1/" + text
    return parse_vector_string(text)


def make_entry(
    number: int,
    vector_text: str = "AV:N/AC:L/PR:N/UI:N/S:U/C:H/I:H/A:H",
    description: Optional[str] = None,
    year: int = 2021
) -> CveEntry:
    return CveEntry(
        cve_id=f"CVE-{year}-{number:04d}",
        description=description or f"A flaw number {number} in the parser of product {number} allows attackers to do harm.",
        truth=vector(vector_text),
        published_year=year,
    )


def make_prediction(cve_id: str, model_id: str, labels: Dict[MetricKind, str], base: BaseVector) -> PredictionSet:
    """Prediction equal to base except for the given overrides."""
    values = base.as_dict()
    values.update(labels)
    return PredictionSet(cve_id=cve_id, model_id=model_id, labels=BaseVector.from_mapping(values))


def random_vector(rng: np.random.Generator) -> BaseVector:
    return BaseVector.from_mapping({
        kind: METRIC_VALUES[kind][rng.integers(len(METRIC_VALUES[kind]))] for kind in MetricKind
    })


def random_dataset(n: int, seed: int = 0) -> List[CveEntry]:
    """n entries with random vectors and distinct, varied descriptions."""
    rng = np.random.default_rng(seed)
    words = [
        "buffer", "overflow", "kernel", "driver", "allows", "remote", "attackers",
        "crafted", "request", "memory", "Apache", "Tomcat", "v2.4.1", "the", "of",
        "local", "users", "privileges", "via", "file", "upload", "Windows", "SMB",
    ]
    entries = []
    for i in range(n):
        length = int(rng.integers(8, 60))
        text = " ".join(words[j] for j in rng.integers(0, len(words), size=length))
        entries.append(CveEntry(
            cve_id=f"CVE-2022-{1000 + i}",
            description=f"Issue {i}: {text}.",
            truth=random_vector(rng),
            published_year=2022,
        ))
    return entries


def count_queries(user_text: str) -> int:
    return len(_QUERY_LINE.findall(user_text))


class FakeTransport:
    """
    In-memory ChatTransport.

    responder(payload) returns a TransportResponse; by default every query
    in the prompt gets DEFAULT_ANSWER.
    """

    def __init__(self, responder: Optional[Callable[[dict], TransportResponse]] = None):
        self.responder = responder or self.answer_all
        self.requests: List[dict] = []

    @staticmethod
    def ok(content: str) -> TransportResponse:
        body = json.dumps({"choices": [{"message": {"role": "assistant", "content": content}}]})
        return TransportResponse(status=200, body=body)

    @classmethod
    def answer_all(cls, payload: dict) -> TransportResponse:
        user = payload["messages"][1]["content"]
        return cls.ok("\n".join([DEFAULT_ANSWER] * count_queries(user)))

    async def post(self, url, headers, payload, timeout):
        self.requests.append({"url": url, "headers": headers, "payload": payload, "timeout": timeout})
        return self.responder(payload)


class ScriptedTransport(FakeTransport):
    """Returns the given responses in order, then repeats the last one."""

    def __init__(self, responses: Sequence[TransportResponse]):
        self.responses = list(responses)
        super().__init__(self._next)

    def _next(self, payload: dict) -> TransportResponse:
        if len(self.responses) > 1:
            return self.responses.pop(0)
        return self.responses[0]


async def no_sleep(delay: float) -> None:
    no_sleep.calls.append(delay)


no_sleep.calls = []


@pytest.fixture
def sleep_calls():
    no_sleep.calls.clear()
    return no_sleep.calls


@pytest.fixture
def provider() -> ProviderConfig:
    return ProviderConfig(
        provider_id="model-a",
        endpoint="https://llm.example.test/v1/chat/completions",
        model_name="model-a-large",
        credential_env_var="MODEL_A_API_KEY",
        max_parallel=2,
    )


@pytest.fixture
def second_provider() -> ProviderConfig:
    return ProviderConfig(
        provider_id="model-b",
        endpoint="https://other.example.test/v1/chat/completions",
        model_name="model-b-chat",
        credential_env_var="MODEL_B_API_KEY",
    )


@pytest.fixture
def environ() -> Dict[str, str]:
    return {"MODEL_A_API_KEY": "key-a", "MODEL_B_API_KEY": "key-b"}


@pytest.fixture
def records_dir() -> Path:
    return FIXTURES / "cve_records"


@pytest.fixture
def providers_file() -> Path:
    return FIXTURES / "providers.json"


@pytest.fixture
def app_config(tmp_path) -> AppConfig:
    return AppConfig(
        dataset_path=str(tmp_path / "dataset.jsonl"),
        predictions_path=str(tmp_path / "predictions.csv"),
        cache_path=str(tmp_path / "cache.jsonl"),
        out_dir=str(tmp_path / "out"),
        rf_trees=10,
    )

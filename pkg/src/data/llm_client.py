"""
Chat-completion client for LLM providers.

This module provides an asynchronous client for OpenAI-compatible
chat-completion endpoints, with credential lookup, rate limiting and retry
with exponential backoff. The HTTP layer is a small transport protocol so
tests can run without a network.
"""

import asyncio
import json
import os
import time
from dataclasses import dataclass, field
from typing import Any, Awaitable, Callable, Dict, Mapping, Optional, Protocol

import aiohttp

from src.models.data_models import ProviderConfig
from src.models.errors import AuthError, ProviderError, RateLimitError
from src.utils.logger import LoggerMixin

SleepFn = Callable[[float], Awaitable[None]]

RETRYABLE_STATUSES = frozenset({408, 500, 502, 503, 504})


@dataclass
class TransportResponse:
    """Status, headers and body text of one HTTP response."""

    status: int
    body: str
    headers: Mapping[str, str] = field(default_factory=dict)


class ChatTransport(Protocol):
    """Sends one JSON POST and returns the raw response."""

    async def post(
        self,
        url: str,
        headers: Dict[str, str],
        payload: Dict[str, Any],
        timeout: float
    ) -> TransportResponse:
        ...


class AiohttpTransport(LoggerMixin):
    """ChatTransport backed by a shared aiohttp session."""

    def __init__(self):
        self.session: Optional[aiohttp.ClientSession] = None

    async def __aenter__(self):
        """Async context manager entry."""
        await self._ensure_session()
        return self

    async def __aexit__(self, exc_type, exc_val, exc_tb):
        """Async context manager exit."""
        await self.close()

    async def _ensure_session(self):
        """Ensure HTTP session is available."""
        if self.session is None or self.session.closed:
            connector = aiohttp.TCPConnector(
                limit=100,
                limit_per_host=30,
                ttl_dns_cache=300,
                use_dns_cache=True
            )
            self.session = aiohttp.ClientSession(connector=connector)

    async def close(self):
        """Close the HTTP session."""
        if self.session and not self.session.closed:
            await self.session.close()

    async def post(
        self,
        url: str,
        headers: Dict[str, str],
        payload: Dict[str, Any],
        timeout: float
    ) -> TransportResponse:
        await self._ensure_session()
        async with self.session.post(
            url,
            json=payload,
            headers=headers,
            timeout=aiohttp.ClientTimeout(total=timeout)
        ) as response:
            body = await response.text()
            return TransportResponse(
                status=response.status,
                body=body,
                headers=dict(response.headers),
            )


class ChatCompletionClient(LoggerMixin):
    """
    Client for one provider.

    Sends system + user messages and returns the assistant text. 401/403
    fail immediately; 429, 408 and 5xx responses and network errors are
    retried up to max_attempts with delays backoff_base * 2**attempt,
    honouring Retry-After when the provider sends it.
    """

    def __init__(
        self,
        provider: ProviderConfig,
        transport: ChatTransport,
        max_attempts: int = 5,
        backoff_base: float = 1.0,
        request_timeout: float = 120.0,
        rate_limit_delay: float = 0.0,
        sleep: SleepFn = asyncio.sleep,
        environ: Optional[Mapping[str, str]] = None
    ):
        """
        Initialize the client.

        Args:
            provider: Provider configuration
            transport: HTTP transport
            max_attempts: Total attempts per request, including the first
            backoff_base: Base delay in seconds for exponential backoff
            request_timeout: Per-request timeout in seconds
            rate_limit_delay: Minimum delay between requests in seconds
            sleep: Awaitable sleep (injected in tests)
            environ: Environment used for the credential lookup
        """
        self.provider = provider
        self.transport = transport
        self.max_attempts = max_attempts
        self.backoff_base = backoff_base
        self.request_timeout = request_timeout
        self.rate_limit_delay = rate_limit_delay
        self.last_request_time = 0.0
        self._sleep = sleep
        self._environ = environ if environ is not None else os.environ

        self.logger.info("Chat client initialized", **provider.redacted())

    def _credential(self) -> str:
        value = self._environ.get(self.provider.credential_env_var, "").strip()
        if not value:
            raise AuthError(
                f"Credential variable {self.provider.credential_env_var} is not set "
                f"for provider {self.provider.provider_id}"
            )
        return value

    def _headers(self) -> Dict[str, str]:
        token = self._credential()
        scheme = self.provider.auth_scheme.strip()
        return {
            self.provider.auth_header: f"{scheme} {token}" if scheme else token,
            "Content-Type": "application/json",
        }

    def _payload(self, system: str, user: str) -> Dict[str, Any]:
        payload: Dict[str, Any] = dict(self.provider.extra_body)
        payload.update({
            "model": self.provider.model_name,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": self.provider.temperature,
        })
        return payload

    async def _rate_limit(self):
        """Implement rate limiting between requests."""
        if self.rate_limit_delay <= 0:
            return
        time_since_last = time.monotonic() - self.last_request_time
        if time_since_last < self.rate_limit_delay:
            await self._sleep(self.rate_limit_delay - time_since_last)
        self.last_request_time = time.monotonic()

    def _backoff(self, retry_count: int) -> float:
        return self.backoff_base * (2 ** retry_count)

    @staticmethod
    def _retry_after(headers: Mapping[str, str]) -> Optional[float]:
        for name, value in headers.items():
            if name.lower() == "retry-after":
                try:
                    return max(0.0, float(value))
                except (TypeError, ValueError):
                    return None
        return None

    async def complete(self, system: str, user: str) -> str:
        """
        Run one chat completion.

        Raises:
            AuthError: Missing credential or HTTP 401/403
            RateLimitError: Still rate limited after the last attempt
            ProviderError: Any other failure after exhausting retries
        """
        headers = self._headers()
        payload = self._payload(system, user)
        return await self._make_request(headers, payload)

    async def _make_request(
        self,
        headers: Dict[str, str],
        payload: Dict[str, Any],
        retry_count: int = 0
    ) -> str:
        """
        Make the HTTP request with retry logic and error handling.

        Args:
            headers: Request headers (carry the credential, never logged)
            payload: JSON body
            retry_count: Current retry attempt

        Returns:
            Assistant message text
        """
        await self._rate_limit()
        attempt = retry_count + 1
        provider_id = self.provider.provider_id

        self.logger.debug("Sending chat completion", provider=provider_id, attempt=attempt)

        try:
            response = await self.transport.post(
                self.provider.endpoint, headers, payload, self.request_timeout
            )
        except (aiohttp.ClientError, asyncio.TimeoutError) as e:
            self.logger.warning(
                "Network error during chat completion",
                provider=provider_id,
                attempt=attempt,
                error=str(e)
            )
            if attempt < self.max_attempts:
                await self._sleep(self._backoff(retry_count))
                return await self._make_request(headers, payload, retry_count + 1)
            raise ProviderError(
                f"{provider_id}: network error after {self.max_attempts} attempts: {e}"
            )

        if response.status in (401, 403):
            self.logger.error("Provider rejected credentials", provider=provider_id, status=response.status)
            raise AuthError(f"{provider_id}: HTTP {response.status} (credentials rejected)")

        if response.status == 429:
            retry_after = self._retry_after(response.headers)
            delay = retry_after if retry_after is not None else self._backoff(retry_count)
            self.logger.warning(
                "Rate limit exceeded, waiting",
                provider=provider_id,
                attempt=attempt,
                retry_after=delay
            )
            if attempt < self.max_attempts:
                await self._sleep(delay)
                return await self._make_request(headers, payload, retry_count + 1)
            raise RateLimitError(f"{provider_id}: rate limited after {self.max_attempts} attempts")

        if response.status in RETRYABLE_STATUSES:
            self.logger.warning(
                "Transient provider error",
                provider=provider_id,
                status=response.status,
                attempt=attempt
            )
            if attempt < self.max_attempts:
                await self._sleep(self._backoff(retry_count))
                return await self._make_request(headers, payload, retry_count + 1)
            raise ProviderError(
                f"{provider_id}: HTTP {response.status} after {self.max_attempts} attempts"
            )

        if response.status >= 400:
            self.logger.error(
                "Chat completion failed",
                provider=provider_id,
                status=response.status,
                error=response.body[:500]
            )
            raise ProviderError(f"{provider_id}: HTTP {response.status}: {response.body[:200]}")

        return self._extract_text(response.body)

    def _extract_text(self, body: str) -> str:
        """Pull choices[0].message.content out of the response body."""
        try:
            data = json.loads(body)
            content = data["choices"][0]["message"]["content"]
        except (json.JSONDecodeError, KeyError, IndexError, TypeError) as e:
            self.logger.error(
                "Failed to parse chat completion",
                provider=self.provider.provider_id,
                response_text=body[:500],
                error=str(e)
            )
            raise ProviderError(f"{self.provider.provider_id}: unexpected response shape: {e}")

        if content is None:
            return ""
        if not isinstance(content, str):
            raise ProviderError(f"{self.provider.provider_id}: message content is not text")
        return content

"""
On-disk replay cache for provider responses.

Records are JSON lines {"key": ..., "response_b64": ...}; the key is the
model id plus the SHA-256 of the full prompt text. The file is only ever
appended to.
"""

import asyncio
import base64
import hashlib
import json
from pathlib import Path
from typing import Dict, Optional, Union

from src.models.errors import IoFailure, SchemaMismatch
from src.utils.logger import LoggerMixin


def make_cache_key(model_id: str, prompt_text: str) -> str:
    digest = hashlib.sha256(prompt_text.encode("utf-8")).hexdigest()
    return f"{model_id}:{digest}"


class ReplayCache(LoggerMixin):
    """
    Append-only response store.

    Reads are served from memory; writes go through a single asyncio lock so
    concurrent batches never interleave lines.
    """

    def __init__(self, path: Union[str, Path]):
        self.path = Path(path)
        self._entries: Dict[str, str] = {}
        self._lock: Optional[asyncio.Lock] = None
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            self.logger.debug("Replay cache file not found, starting empty", path=str(self.path))
            return

        try:
            lines = self.path.read_text(encoding="utf-8").splitlines()
        except OSError as e:
            raise IoFailure(f"Cannot read replay cache {self.path}: {e}")

        for line_no, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                key = record["key"]
                response = base64.b64decode(record["response_b64"], validate=True).decode("utf-8")
            except (ValueError, KeyError, TypeError) as e:
                raise SchemaMismatch(f"{self.path}:{line_no} is not a cache record: {e}")
            # first write wins
            self._entries.setdefault(key, response)

        self.logger.info("Replay cache loaded", path=str(self.path), entries=len(self._entries))

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> Optional[str]:
        return self._entries.get(key)

    async def put(self, key: str, response: str) -> None:
        """
        Append a response. A key that is already stored keeps its first
        response.

        Raises:
            IoFailure: If the file cannot be written
        """
        if self._lock is None:
            self._lock = asyncio.Lock()

        async with self._lock:
            existing = self._entries.get(key)
            if existing is not None:
                if existing != response:
                    self.logger.warning("Keeping first cached response for key", key=key)
                return

            line = json.dumps({
                "key": key,
                "response_b64": base64.b64encode(response.encode("utf-8")).decode("ascii"),
            })
            try:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8", newline="\n") as f:
                    f.write(line + "\n")
            except OSError as e:
                self.logger.error("Failed to append to replay cache", path=str(self.path), error=str(e))
                raise IoFailure(f"Cannot write replay cache {self.path}: {e}")

            self._entries[key] = response
            self.logger.debug("Response cached", key=key)

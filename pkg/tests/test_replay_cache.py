"""
Tests for the replay cache.
"""

import pytest

from src.data.replay_cache import ReplayCache, make_cache_key
from src.models.errors import SchemaMismatch


class TestReplayCache:
    """Test cases for ReplayCache."""

    def test_key_depends_on_model_and_prompt(self):
        """Test cache key construction."""
        key = make_cache_key("model-a", "prompt")

        assert key.startswith("model-a:")
        assert len(key.split(":", 1)[1]) == 64
        assert key == make_cache_key("model-a", "prompt")
        assert key != make_cache_key("model-b", "prompt")
        assert key != make_cache_key("model-a", "prompt ")

    @pytest.mark.asyncio
    async def test_put_then_reload(self, tmp_path):
        """Test that stored responses survive a reload byte for byte."""
        path = tmp_path / "cache.jsonl"
        cache = ReplayCache(path)
        text = "LOW | NETWORK\nünïcode ✓\r\n  trailing  "

        await cache.put("k1", text)

        reloaded = ReplayCache(path)
        assert "k1" in reloaded
        assert reloaded.get("k1") == text
        assert len(reloaded) == 1

    @pytest.mark.asyncio
    async def test_first_write_wins(self, tmp_path):
        """Test that a second response for a key is ignored."""
        path = tmp_path / "cache.jsonl"
        cache = ReplayCache(path)

        await cache.put("k1", "first")
        await cache.put("k1", "second")

        assert cache.get("k1") == "first"
        assert ReplayCache(path).get("k1") == "first"
        assert len(path.read_text(encoding="utf-8").splitlines()) == 1

    def test_missing_file_is_empty(self, tmp_path):
        """Test a cache path that does not exist yet."""
        cache = ReplayCache(tmp_path / "nothing.jsonl")

        assert len(cache) == 0
        assert cache.get("k") is None

    def test_corrupt_line(self, tmp_path):
        """Test that a corrupt record is reported."""
        path = tmp_path / "cache.jsonl"
        path.write_text('{"key": "k1"}\n', encoding="utf-8")

        with pytest.raises(SchemaMismatch, match="not a cache record"):
            ReplayCache(path)


if __name__ == "__main__":
    pytest.main([__file__])

# In-memory store for matrix factorizations reused across iterations
import logging
import threading
from collections import OrderedDict
from typing import Any, Hashable, Protocol

logger = logging.getLogger(__name__)


class CacheBackend(Protocol):
    """Protocol for factorization caches."""

    def get(self, key: Hashable) -> Any | None:
        """Get value from cache."""
        ...

    def set(self, key: Hashable, value: Any) -> None:
        """Store value under key."""
        ...

    def delete(self, key: Hashable) -> None:
        """Delete key from cache."""
        ...


class FactorizationCache:
    """
    Bounded in-memory cache, least recently used entry evicted first.
    Reads and writes are guarded by a lock so a cache can back an oracle
    shared by concurrent runs.
    """

    def __init__(self, max_entries: int = 8):
        self.max_entries = max_entries
        self._cache: OrderedDict[Hashable, Any] = OrderedDict()
        self._lock = threading.Lock()

    def get(self, key: Hashable) -> Any | None:
        """Get value from cache, return None if missing."""
        with self._lock:
            if key not in self._cache:
                return None
            self._cache.move_to_end(key)
            return self._cache[key]

    def set(self, key: Hashable, value: Any) -> None:
        with self._lock:
            self._cache[key] = value
            self._cache.move_to_end(key)
            while len(self._cache) > self.max_entries:
                evicted, _ = self._cache.popitem(last=False)
                logger.debug(f"Evicted factorization for key {evicted!r}")

    def delete(self, key: Hashable) -> None:
        with self._lock:
            self._cache.pop(key, None)

    def clear(self) -> None:
        """Clear all cached values."""
        with self._lock:
            self._cache.clear()

    def __len__(self) -> int:
        with self._lock:
            return len(self._cache)

    def __contains__(self, key: Hashable) -> bool:
        with self._lock:
            return key in self._cache

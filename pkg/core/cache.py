"""
Thread-safe memoization of expensive intermediate results (embeddings,
affinities) keyed by content digests of their inputs.
"""

import hashlib
import json
import threading
import time
from typing import Any, Callable, Dict, Optional

import numpy as np


def make_key(*parts: Any) -> str:
    """
    Content digest of arrays, dicts and scalars.

    Arrays contribute their dtype, shape and raw bytes; everything else its
    sorted JSON form.
    """
    digest = hashlib.sha256()
    for part in parts:
        if isinstance(part, np.ndarray):
            array = np.ascontiguousarray(part)
            digest.update(f"{array.dtype.str}{array.shape}".encode())
            digest.update(array.tobytes())
        else:
            digest.update(json.dumps(part, sort_keys=True, default=str).encode())
        digest.update(b"|")
    return digest.hexdigest()


class ResultCache:
    """Thread-safe result cache with per-entry timestamps."""

    def __init__(self):
        self._cache: Dict[str, Dict[str, Any]] = {}
        self._lock = threading.Lock()
        self._hits = 0
        self._misses = 0

    def get(self, key: str) -> Optional[Any]:
        """
        Get a cached result.

        Args:
            key: Cache key

        Returns:
            Cached value or None if not found
        """
        with self._lock:
            entry = self._cache.get(key)
            if entry is None:
                self._misses += 1
                return None
            self._hits += 1
            return entry['data']

    def set(self, key: str, data: Any) -> None:
        with self._lock:
            self._cache[key] = {
                'data': data,
                'timestamp': time.time()
            }

    def get_or_compute(self, key: str, compute: Callable[[], Any]) -> Any:
        """
        Return the cached value for ``key``, computing and storing it on a miss.

        The computation runs outside the lock; concurrent misses on the same
        key may compute twice and the last result wins.
        """
        cached = self.get(key)
        if cached is not None:
            return cached
        value = compute()
        self.set(key, value)
        return value

    def clear(self, key: str = None) -> None:
        """
        Clear cached data.

        Args:
            key: Specific key to clear, or None to clear all
        """
        with self._lock:
            if key:
                self._cache.pop(key, None)
            else:
                self._cache.clear()

    def get_age(self, key: str) -> Optional[float]:
        """Age of an entry in seconds, or None if not found."""
        with self._lock:
            if key not in self._cache:
                return None
            return time.time() - self._cache[key]['timestamp']

    def get_all_keys(self) -> list:
        with self._lock:
            return list(self._cache.keys())

    def get_cache_info(self) -> Dict[str, Any]:
        """
        Get cache statistics.

        Returns:
            Dictionary with entry count, hit/miss counters and per-entry ages
        """
        with self._lock:
            current_time = time.time()
            info = {
                'total_entries': len(self._cache),
                'hits': self._hits,
                'misses': self._misses,
                'entries': {}
            }

            for key, entry in self._cache.items():
                info['entries'][key] = {
                    'age_seconds': current_time - entry['timestamp'],
                    'type': type(entry['data']).__name__
                }

            return info

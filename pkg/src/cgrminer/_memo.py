"""Thread-safe compute-once memo table."""

from __future__ import annotations

import threading


class OnceCache:
    """Thread-safe memo table that computes each key at most once."""

    def __init__(self):
        self._lock = threading.Lock()
        self._values: dict = {}
        self._pending: dict = {}

    def get(self, key, compute):
        with self._lock:
            if key in self._values:
                return self._values[key]
            event = self._pending.get(key)
            owner = event is None
            if owner:
                event = self._pending[key] = threading.Event()
        if not owner:
            event.wait()
            with self._lock:
                if key in self._values:
                    return self._values[key]
            return self.get(key, compute)  # the owner failed; retry
        try:
            value = compute()
        except BaseException:
            with self._lock:
                del self._pending[key]
            event.set()
            raise
        with self._lock:
            self._values[key] = value
            del self._pending[key]
        event.set()
        return value

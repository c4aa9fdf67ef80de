"""Record/replay cache for backend calls.

Records live at ``{cache_dir}/{backend_id}/{request_digest}.record`` as JSON
carrying the request, the response, and a response digest checked on read.
Modes:

- ``off``           pass through, no cache I/O
- ``record``        always call the backend and overwrite the record
- ``replay``        answer from cache, call-and-record on miss
- ``strict-replay`` answer from cache, fail loud on miss

The mode can come from the ``PLANWEAVE_CACHE_MODE`` environment variable when
not set explicitly.
"""

from __future__ import annotations

import json
import os
import re
import threading
from collections import defaultdict
from pathlib import Path
from typing import Any

from .base import (
    Backend,
    CacheIntegrityError,
    CacheMissError,
    canonical_request,
    request_digest,
)

CACHE_MODES = ("off", "record", "replay", "strict-replay")
CACHE_MODE_ENV = "PLANWEAVE_CACHE_MODE"


def resolve_cache_mode(explicit: str | None = None, default: str = "off") -> str:
    """Pick the cache mode: explicit setting wins, then the environment."""
    mode = explicit or os.environ.get(CACHE_MODE_ENV) or default
    if mode not in CACHE_MODES:
        raise ValueError(f"unknown cache mode '{mode}' (expected one of {CACHE_MODES})")
    return mode


def _path_safe(backend_id: str) -> str:
    """Backend ids may embed URLs; collapse anything path-hostile."""
    return re.sub(r"[^A-Za-z0-9._-]+", "_", backend_id)


class ReplayBackend(Backend):
    """Wraps any backend with the record/replay cache.

    Writes are serialized per key; reads take no lock. ``calls`` reflects the
    inner backend, i.e. the number of non-replayed calls.
    """

    def __init__(self, inner: Backend, cache_dir: str | Path, mode: str = "replay") -> None:
        super().__init__()
        if mode not in CACHE_MODES:
            raise ValueError(f"unknown cache mode '{mode}'")
        self.inner = inner
        self.mode = mode
        self.backend_id = inner.backend_id
        self.cache_dir = Path(cache_dir) / _path_safe(inner.backend_id)
        self.cache_dir.mkdir(parents=True, exist_ok=True)
        self._key_locks: dict[str, threading.Lock] = defaultdict(threading.Lock)
        self._master = threading.Lock()

    @property
    def calls(self) -> int:
        return self.inner.calls

    def _record_path(self, digest: str) -> Path:
        return self.cache_dir / f"{digest}.record"

    def _load(self, digest: str) -> dict[str, Any] | None:
        path = self._record_path(digest)
        if not path.exists():
            return None
        try:
            record = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise CacheIntegrityError(f"unreadable cache record {path}: {exc}") from exc
        expected = record.get("response_digest")
        response = record.get("response")
        if response is None or expected != request_digest(response):
            raise CacheIntegrityError(f"cache record {path} failed integrity check")
        return response

    def _store(self, digest: str, request: dict[str, Any], response: dict[str, Any]) -> None:
        with self._master:
            lock = self._key_locks[digest]
        with lock:
            path = self._record_path(digest)
            record = {
                "backend_id": self.backend_id,
                "request": request,
                "response": response,
                "response_digest": request_digest(response),
            }
            tmp = path.with_suffix(".tmp")
            tmp.write_text(
                json.dumps(record, sort_keys=True, ensure_ascii=True), encoding="utf-8"
            )
            os.replace(tmp, path)

    def invoke(self, request: dict[str, Any]) -> dict[str, Any]:
        if self.mode == "off":
            return self.inner.invoke(request)
        digest = request_digest(request)
        if self.mode in ("replay", "strict-replay"):
            cached = self._load(digest)
            if cached is not None:
                return cached
            if self.mode == "strict-replay":
                raise CacheMissError(
                    f"cache miss for {self.backend_id} request {digest} "
                    f"({canonical_request(request)[:120]}...)"
                )
        response = self.inner.invoke(request)
        self._store(digest, request, response)
        return response


def wrap_with_replay(backend: Backend, cache_dir: str | Path, mode: str = "replay") -> Backend:
    """Return the backend wrapped with the replay cache (or unwrapped for
    mode ``off``)."""
    if mode == "off":
        return backend
    return ReplayBackend(backend, cache_dir, mode)

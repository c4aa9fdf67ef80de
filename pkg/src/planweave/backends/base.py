"""Contracts for the four model services plus the shared plumbing: request
canonicalization, content-addressed image persistence, and the suite object
the pipeline talks to.

Every backend exposes one low-level ``invoke(request) -> response`` call over
JSON-compatible dicts; the typed operations live on :class:`BackendSuite`.
Keeping the wire at the dict level is what lets the replay cache wrap any
backend uniformly.
"""

from __future__ import annotations

import base64
import hashlib
import io
import json
import math
import os
import threading
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any

from PIL import Image

from ..model import GenerationParams, ImageHandle
from ..templates import CAPTION_QUESTION


class BackendError(RuntimeError):
    """Base class for backend failures."""


class TransportError(BackendError):
    """Network-level failure or 5xx response; retryable."""


class RateLimitError(TransportError):
    """HTTP 429; retryable with backoff."""


class BackendRefusal(BackendError):
    """Semantic 4xx rejection; never retried. Carries the backend message."""


class CacheMissError(BackendError):
    """Strict replay mode saw a request with no recorded response."""


class CacheIntegrityError(BackendError):
    """A cache record failed its integrity check."""


class UnsupportedSpaceError(BackendError):
    """The embedder does not serve the requested space."""


class EmbedSpace(str, Enum):
    SENTENCE = "sentence"
    WORD = "word"
    JOINT_TEXT = "joint_text"
    JOINT_IMAGE = "joint_image"


@dataclass(frozen=True)
class Completion:
    text: str
    finish_reason: str = "stop"  # stop | length | error


@dataclass(frozen=True)
class EmbeddingVector:
    values: tuple[float, ...]
    space: EmbedSpace


@dataclass(frozen=True)
class CacheKey:
    backend_id: str
    request_digest: str


def canonical_request(request: dict[str, Any]) -> str:
    """Stable encoding of a request: key order and incidental whitespace in
    the dict never change the result."""
    return json.dumps(request, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def request_digest(request: dict[str, Any]) -> str:
    return hashlib.sha256(canonical_request(request).encode("utf-8")).hexdigest()


def cache_key(backend_id: str, request: dict[str, Any]) -> CacheKey:
    return CacheKey(backend_id=backend_id, request_digest=request_digest(request))


class Backend:
    """A model service: ``invoke`` takes and returns JSON-compatible dicts.

    ``calls`` counts actual invocations of this backend (a replay wrapper
    that answers from cache does not touch it).
    """

    backend_id: str = "backend"

    def __init__(self) -> None:
        self._calls = 0
        self._calls_lock = threading.Lock()

    @property
    def calls(self) -> int:
        return self._calls

    def reset_calls(self) -> None:
        with self._calls_lock:
            self._calls = 0

    def invoke(self, request: dict[str, Any]) -> dict[str, Any]:
        with self._calls_lock:
            self._calls += 1
        return self._invoke(request)

    def _invoke(self, request: dict[str, Any]) -> dict[str, Any]:
        raise NotImplementedError


def innermost(backend: Backend) -> Backend:
    """Unwrap replay wrappers down to the real backend."""
    seen = backend
    while hasattr(seen, "inner"):
        seen = seen.inner  # type: ignore[attr-defined]
    return seen


class ImageStore:
    """Content-addressed image files under ``root``/``prefix``.

    Locators handed out are relative to ``root`` so plan records stay
    portable alongside the directory tree they were written into.
    """

    def __init__(self, root: str | Path, prefix: str = "assets") -> None:
        self.root = Path(root)
        self.prefix = prefix
        (self.root / prefix).mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def put(self, data: bytes, fmt: str | None = None) -> ImageHandle:
        """Persist image bytes and return a probed, content-addressed handle."""
        try:
            with Image.open(io.BytesIO(data)) as im:
                width, height = im.size
                detected = (im.format or "png").lower()
        except Exception as exc:
            raise BackendError(f"image bytes do not decode: {exc}") from exc
        fmt = (fmt or detected).lower()
        digest = hashlib.sha256(data).hexdigest()
        locator = f"{self.prefix}/{digest[:20]}.{fmt}"
        path = self.root / locator
        if not path.exists():
            with self._lock:
                if not path.exists():
                    tmp = path.with_suffix(path.suffix + ".tmp")
                    tmp.write_bytes(data)
                    os.replace(tmp, path)
        return ImageHandle(locator=locator, width=width, height=height, format=fmt)

    def resolve(self, handle: ImageHandle) -> Path:
        return self.root / handle.locator

    def read(self, handle: ImageHandle) -> bytes:
        path = self.resolve(handle)
        if not path.exists():
            raise BackendError(f"image file missing at locator '{handle.locator}'")
        return path.read_bytes()


class BackendSuite:
    """The four model-client contracts bundled with the image store.

    All members are shareable between concurrent workers; the typed helpers
    validate preconditions, build canonical requests, and decode responses.
    """

    def __init__(
        self,
        text: Backend,
        image: Backend,
        captioner: Backend,
        embedder: Backend,
        store: ImageStore,
    ) -> None:
        self.text = text
        self.image = image
        self.captioner = captioner
        self.embedder = embedder
        self.store = store

    def text_complete(
        self, prompt: str, params: GenerationParams | None = None
    ) -> Completion:
        if not prompt.strip():
            raise ValueError("prompt must be non-empty")
        params = params or GenerationParams()
        response = self.text.invoke(
            {
                "op": "text_complete",
                "prompt": prompt,
                "temperature": params.temperature,
                "max_tokens": params.max_tokens,
                "seed": params.seed,
            }
        )
        completion = Completion(
            text=str(response.get("text", "")),
            finish_reason=str(response.get("finish_reason", "stop")),
        )
        if completion.finish_reason in ("stop", "length") and not completion.text:
            raise BackendError("text backend returned an empty completion")
        return completion

    def image_generate(
        self, prompt: str, width: int = 512, height: int = 512
    ) -> ImageHandle:
        if not prompt.strip():
            raise ValueError("prompt must be non-empty")
        if width < 64 or height < 64:
            raise ValueError("image dimensions must be >= 64 pixels")
        response = self.image.invoke(
            {"op": "image_generate", "prompt": prompt, "width": width, "height": height}
        )
        data = base64.b64decode(response["image_b64"])
        handle = self.store.put(data, response.get("format"))
        if (handle.width, handle.height) != (width, height):
            raise BackendError(
                f"image backend returned {handle.width}x{handle.height}, "
                f"requested {width}x{height}"
            )
        return handle

    def caption(self, image: ImageHandle, question: str = CAPTION_QUESTION) -> str:
        data = self.store.read(image)
        response = self.captioner.invoke(
            {
                "op": "caption",
                "image_b64": base64.b64encode(data).decode("ascii"),
                "question": question,
            }
        )
        caption = str(response.get("caption", ""))
        if not caption:
            raise BackendError("caption backend returned an empty caption")
        return caption

    def _embed(self, request: dict[str, Any], space: EmbedSpace) -> EmbeddingVector:
        response = self.embedder.invoke(request)
        values = tuple(float(v) for v in response["vector"])
        if not values or not all(math.isfinite(v) for v in values):
            raise BackendError("embedder returned a non-finite or empty vector")
        return EmbeddingVector(values=values, space=space)

    def embed_text(self, text: str, space: EmbedSpace) -> EmbeddingVector:
        if space == EmbedSpace.JOINT_IMAGE:
            raise UnsupportedSpaceError("text cannot be embedded in joint_image space")
        if not text.strip():
            raise ValueError("text to embed must be non-empty")
        return self._embed(
            {"op": "embed", "space": space.value, "text": text}, space
        )

    def embed_image(self, image: ImageHandle) -> EmbeddingVector:
        data = self.store.read(image)
        return self._embed(
            {
                "op": "embed",
                "space": EmbedSpace.JOINT_IMAGE.value,
                "image_b64": base64.b64encode(data).decode("ascii"),
            },
            EmbedSpace.JOINT_IMAGE,
        )

    def call_counts(self) -> dict[str, int]:
        """Non-replayed call count per backend kind."""
        return {
            "text": innermost(self.text).calls,
            "image": innermost(self.image).calls,
            "caption": innermost(self.captioner).calls,
            "embed": innermost(self.embedder).calls,
        }

    def total_calls(self) -> int:
        return sum(self.call_counts().values())

    def reset_calls(self) -> None:
        for backend in (self.text, self.image, self.captioner, self.embedder):
            innermost(backend).reset_calls()

    def fingerprint(self) -> str:
        return (
            f"text={innermost(self.text).backend_id};"
            f"image={innermost(self.image).backend_id};"
            f"caption={innermost(self.captioner).backend_id};"
            f"embed={innermost(self.embedder).backend_id}"
        )

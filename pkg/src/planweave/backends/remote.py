"""HTTP clients for remote model services.

Text generation speaks the OpenAI-compatible chat-completions protocol with
the whole prompt in a single user message. Image generation, captioning, and
embedding speak small documented REST shapes so any vendor or local server
can plug in. Transport failures and rate limits are retried with exponential
backoff; semantic 4xx refusals are surfaced immediately.
"""

from __future__ import annotations

import logging
import threading
import time
from typing import Any

import requests

from .base import Backend, BackendError, BackendRefusal, RateLimitError, TransportError

logger = logging.getLogger(__name__)

RETRY_ATTEMPTS = 3
RETRY_BASE_DELAY = 1.0


class HttpBackend(Backend):
    """``min_interval`` seconds between requests gives a simple per-backend
    rate limit shared by all workers; 0 disables it."""

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        timeout: float = 120.0,
        retry_attempts: int = RETRY_ATTEMPTS,
        retry_base_delay: float = RETRY_BASE_DELAY,
        min_interval: float = 0.0,
    ) -> None:
        super().__init__()
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retry_attempts = retry_attempts
        self.retry_base_delay = retry_base_delay
        self.min_interval = min_interval
        self._throttle_lock = threading.Lock()
        self._last_request = 0.0
        self.session = requests.Session()
        if api_key:
            self.session.headers["Authorization"] = f"Bearer {api_key}"

    def _throttle(self) -> None:
        if self.min_interval <= 0:
            return
        with self._throttle_lock:
            now = time.monotonic()
            wait = self._last_request + self.min_interval - now
            if wait > 0:
                time.sleep(wait)
                now = time.monotonic()
            self._last_request = now

    def _post(self, path: str, body: dict[str, Any]) -> dict[str, Any]:
        url = f"{self.base_url}{path}"
        last_error: BackendError | None = None
        for attempt in range(self.retry_attempts):
            if attempt:
                delay = self.retry_base_delay * 2 ** (attempt - 1)
                logger.debug("retrying %s in %.1fs (attempt %d)", url, delay, attempt + 1)
                time.sleep(delay)
            self._throttle()
            try:
                response = self.session.post(url, json=body, timeout=self.timeout)
            except requests.RequestException as exc:
                last_error = TransportError(f"transport failure calling {url}: {exc}")
                continue
            if response.status_code == 429:
                last_error = RateLimitError(f"rate limited by {url}: {response.text[:200]}")
                continue
            if response.status_code >= 500:
                last_error = TransportError(
                    f"server error {response.status_code} from {url}: {response.text[:200]}"
                )
                continue
            if response.status_code >= 400:
                raise BackendRefusal(
                    f"{url} refused request ({response.status_code}): {response.text[:500]}"
                )
            try:
                return response.json()
            except ValueError as exc:
                raise BackendError(f"malformed response from {url}: {exc}") from exc
        assert last_error is not None
        raise last_error


class ChatCompletionsBackend(HttpBackend):
    """POST {base_url}/v1/chat/completions with a single user message."""

    def __init__(self, base_url: str, model: str, api_key: str | None = None, **kwargs: Any) -> None:
        super().__init__(base_url, api_key, **kwargs)
        self.model = model
        self.backend_id = f"chat:{model}"

    def _invoke(self, request: dict[str, Any]) -> dict[str, Any]:
        body = {
            "model": self.model,
            "messages": [{"role": "user", "content": request["prompt"]}],
            "temperature": request["temperature"],
            "max_tokens": request["max_tokens"],
        }
        data = self._post("/v1/chat/completions", body)
        try:
            choice = data["choices"][0]
            text = choice["message"]["content"]
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed chat completion response: {data!r:.200}") from exc
        finish = choice.get("finish_reason") or "stop"
        return {"text": text or "", "finish_reason": "length" if finish == "length" else "stop"}


class RestImageBackend(HttpBackend):
    """POST {base_url}/generate {prompt,width,height} -> {image_b64,format}."""

    def __init__(self, base_url: str, api_key: str | None = None, **kwargs: Any) -> None:
        super().__init__(base_url, api_key, **kwargs)
        self.backend_id = f"image:{self.base_url}"

    def _invoke(self, request: dict[str, Any]) -> dict[str, Any]:
        data = self._post(
            "/generate",
            {
                "prompt": request["prompt"],
                "width": request["width"],
                "height": request["height"],
            },
        )
        if "image_b64" not in data:
            raise BackendError("image service response lacks 'image_b64'")
        return {"image_b64": data["image_b64"], "format": data.get("format", "png")}


class RestCaptionBackend(HttpBackend):
    """POST {base_url}/caption {image_b64,question} -> {caption}."""

    def __init__(self, base_url: str, api_key: str | None = None, **kwargs: Any) -> None:
        super().__init__(base_url, api_key, **kwargs)
        self.backend_id = f"caption:{self.base_url}"

    def _invoke(self, request: dict[str, Any]) -> dict[str, Any]:
        data = self._post(
            "/caption",
            {"image_b64": request["image_b64"], "question": request["question"]},
        )
        if "caption" not in data:
            raise BackendError("caption service response lacks 'caption'")
        return {"caption": data["caption"]}


class RestEmbedBackend(HttpBackend):
    """POST {base_url}/embed {input,space} -> {vector}."""

    def __init__(self, base_url: str, api_key: str | None = None, **kwargs: Any) -> None:
        super().__init__(base_url, api_key, **kwargs)
        self.backend_id = f"embed:{self.base_url}"

    def _invoke(self, request: dict[str, Any]) -> dict[str, Any]:
        payload = request.get("text", request.get("image_b64"))
        data = self._post("/embed", {"input": payload, "space": request["space"]})
        if "vector" not in data:
            raise BackendError("embed service response lacks 'vector'")
        return {"vector": data["vector"]}

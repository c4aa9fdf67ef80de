"""Deterministic in-process stand-ins for the four model services.

Every mock is a pure function of (canonical request, seed): repeated calls
are byte-identical, across runs and platforms. The text mock understands the
pipeline's prompt grammar (task prompts, revision prompts, stepwise prompts)
well enough to answer each with a parseable shape, so the whole plan flow
runs end to end with no model anywhere.
"""

from __future__ import annotations

import base64
import hashlib
import struct
import zlib
from typing import Any, Callable, Iterable, Sequence

import numpy as np

from ..templates import STEPWISE_HISTORY_HEADER, STEPWISE_STOP_MARKER
from .base import Backend, BackendError, UnsupportedSpaceError, canonical_request

# Vocabulary the mocks draw pseudo-text from. Fixed and ASCII-only so digests
# and downstream token metrics are stable everywhere.
_WORDS = (
    "stir", "bowl", "mix", "pour", "glass", "table", "rinse", "chop",
    "board", "knife", "fold", "paper", "ribbon", "wrap", "plant", "soil",
    "water", "brush", "paint", "clean", "dry", "heat", "pan", "oven",
    "slice", "fruit", "layer", "press", "tie", "stack", "cool", "serve",
    "wipe", "cloth", "seal", "jar", "label", "shelf", "light", "frame",
    "measure", "tape", "cut", "glue", "pin", "thread", "needle", "sand",
    "wood", "screw", "drill", "hang", "level", "mark", "trace", "edge",
    "corner", "center", "basket", "handle", "cover", "lid", "tray", "rack",
)


def _digest(*parts: str) -> bytes:
    h = hashlib.sha256()
    for part in parts:
        h.update(part.encode("utf-8"))
        h.update(b"\x1f")
    return h.digest()


def _words_from(digest: bytes, count: int) -> str:
    picked = [_WORDS[digest[i % len(digest)] % len(_WORDS)] for i in range(count)]
    return " ".join(picked)


def _step_line(base: bytes, index: int) -> str:
    d = _digest(base.hex(), f"step:{index}")
    length = 4 + d[0] % 3
    return f"Step {index}: {_words_from(d, length)}"


def _count_step_lines(block: str) -> int:
    return sum(1 for line in block.splitlines() if line.strip().startswith("Step "))


class MockTextBackend(Backend):
    """Digest-driven text generator.

    ``stepwise_total`` overrides the digest-derived step count used to decide
    when a stepwise conversation emits the stop marker (handy for exercising
    termination and bound behavior in tests).
    ``revision_count_offset`` shifts how many steps a revision reply carries,
    to exercise the pairing-adjustment path.
    """

    def __init__(
        self,
        seed: int = 0,
        stepwise_total: int | None = None,
        revision_count_offset: int = 0,
    ) -> None:
        super().__init__()
        self.seed = seed
        self.stepwise_total = stepwise_total
        self.revision_count_offset = revision_count_offset
        self.backend_id = f"mock-text-s{seed}"

    def _invoke(self, request: dict[str, Any]) -> dict[str, Any]:
        prompt = request["prompt"]
        base = _digest(canonical_request(request), str(self.seed))
        if "\nCaptions:\n" in prompt and prompt.startswith("Step-by-step Procedure:"):
            text = self._revision(prompt, base)
        elif STEPWISE_HISTORY_HEADER in prompt and STEPWISE_STOP_MARKER in prompt:
            text = self._stepwise(prompt)
        elif "\nTask: " in prompt:
            count = 3 + base[0] % 4
            text = "\n".join(_step_line(base, i + 1) for i in range(count))
        else:
            d = _digest(base.hex(), "scene")
            text = f"a clear illustration of {_words_from(d, 5)}, detailed scene"
        return {"text": text, "finish_reason": "stop"}

    def _revision(self, prompt: str, base: bytes) -> str:
        procedure_block = prompt.split("\nCaptions:\n", 1)[0]
        count = max(1, _count_step_lines(procedure_block) + self.revision_count_offset)
        return "\n".join(_step_line(base, i + 1) for i in range(count))

    def _stepwise(self, prompt: str) -> str:
        lines = prompt.splitlines()
        task_line = next((l for l in lines if l.startswith("Task: ")), prompt[:80])
        history = 0
        in_history = False
        for line in lines:
            if line == STEPWISE_HISTORY_HEADER:
                in_history = True
            elif in_history and line.strip().startswith("Step "):
                history += 1
            elif in_history and not line.strip().startswith("Step "):
                in_history = False
        total = self.stepwise_total
        if total is None:
            total = 3 + _digest(task_line, str(self.seed))[0] % 4
        if history >= total:
            return STEPWISE_STOP_MARKER
        return _step_line(_digest(task_line, str(self.seed), str(history + 1)), history + 1)


class ScriptedTextBackend(Backend):
    """Plays back a fixed list of completions, or defers to a function."""

    backend_id = "scripted-text"

    def __init__(
        self,
        responses: Sequence[str] | None = None,
        fn: Callable[[str], str] | None = None,
    ) -> None:
        super().__init__()
        self._responses = list(responses or [])
        self._fn = fn
        self._cursor = 0

    def _invoke(self, request: dict[str, Any]) -> dict[str, Any]:
        if self._fn is not None:
            return {"text": self._fn(request["prompt"]), "finish_reason": "stop"}
        if self._cursor >= len(self._responses):
            raise BackendError("scripted text backend ran out of responses")
        text = self._responses[self._cursor]
        self._cursor += 1
        return {"text": text, "finish_reason": "stop"}


def deterministic_png(digest: bytes, width: int, height: int) -> bytes:
    """Encode a PNG whose pixels derive only from ``digest``.

    The encoder is hand-rolled (IHDR/IDAT/IEND with a fixed zlib level) so the
    bytes never depend on the imaging library version.
    """
    pal = np.frombuffer(digest, dtype=np.uint8).astype(np.int64)
    xs = np.arange(width, dtype=np.int64)
    ys = np.arange(height, dtype=np.int64)
    r = pal[(xs[None, :] + ys[:, None]) % len(pal)]
    g = pal[(2 * xs[None, :] + 3 * ys[:, None]) % len(pal)]
    b = pal[(5 * xs[None, :] + 7 * ys[:, None]) % len(pal)]
    pixels = np.stack([r, g, b], axis=-1).astype(np.uint8)
    rows = np.concatenate(
        [np.zeros((height, 1), dtype=np.uint8), pixels.reshape(height, width * 3)],
        axis=1,
    )

    def chunk(tag: bytes, data: bytes) -> bytes:
        return (
            struct.pack(">I", len(data))
            + tag
            + data
            + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)
        )

    ihdr = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    idat = zlib.compress(rows.tobytes(), 6)
    return (
        b"\x89PNG\r\n\x1a\n"
        + chunk(b"IHDR", ihdr)
        + chunk(b"IDAT", idat)
        + chunk(b"IEND", b"")
    )


class MockImageBackend(Backend):
    def __init__(self, seed: int = 0) -> None:
        super().__init__()
        self.seed = seed
        self.backend_id = f"mock-image-s{seed}"

    def _invoke(self, request: dict[str, Any]) -> dict[str, Any]:
        digest = _digest(canonical_request(request), str(self.seed))
        data = deterministic_png(digest, int(request["width"]), int(request["height"]))
        return {"image_b64": base64.b64encode(data).decode("ascii"), "format": "png"}


class MockCaptionBackend(Backend):
    """Caption is a pure function of the image bytes digest."""

    def __init__(self, seed: int = 0) -> None:
        super().__init__()
        self.seed = seed
        self.backend_id = f"mock-caption-s{seed}"

    def _invoke(self, request: dict[str, Any]) -> dict[str, Any]:
        data = base64.b64decode(request["image_b64"])
        d = _digest(hashlib.sha256(data).hexdigest(), str(self.seed))
        return {"caption": f"a scene showing {_words_from(d, 5)}"}


def _hash_vector(key: str, dim: int) -> list[float]:
    values: list[float] = []
    counter = 0
    while len(values) < dim:
        block = hashlib.sha256(f"{key}:{counter}".encode("utf-8")).digest()
        for i in range(0, len(block) - 3, 4):
            if len(values) >= dim:
                break
            (raw,) = struct.unpack(">I", block[i : i + 4])
            values.append(raw / 0xFFFFFFFF * 2.0 - 1.0)
        counter += 1
    return values


class MockEmbeddingBackend(Backend):
    """Hash-seeded embeddings: finite, fixed-dimension per space, and the two
    joint spaces share one dimension."""

    def __init__(
        self,
        seed: int = 0,
        sentence_dim: int = 16,
        word_dim: int = 8,
        joint_dim: int = 16,
    ) -> None:
        super().__init__()
        self.seed = seed
        self.dims = {
            "sentence": sentence_dim,
            "word": word_dim,
            "joint_text": joint_dim,
            "joint_image": joint_dim,
        }
        self.backend_id = f"mock-embed-s{seed}"

    def _invoke(self, request: dict[str, Any]) -> dict[str, Any]:
        space = request["space"]
        if space not in self.dims:
            raise UnsupportedSpaceError(f"unsupported embedding space '{space}'")
        if "text" in request:
            key = f"text:{space}:{request['text']}:{self.seed}"
        else:
            payload = hashlib.sha256(base64.b64decode(request["image_b64"])).hexdigest()
            key = f"image:{space}:{payload}:{self.seed}"
        return {"vector": _hash_vector(key, self.dims[space])}


class FixtureEmbedder(Backend):
    """Embedder backed by an explicit lookup table, for tests and harness
    constructions.

    Text inputs are keyed by the text itself; image inputs by the sha256 hex
    digest of the image bytes. Keys are (space, key) pairs.
    """

    backend_id = "fixture-embed"

    def __init__(
        self, table: dict[tuple[str, str], Iterable[float]], strict: bool = True
    ) -> None:
        super().__init__()
        self.table = {k: tuple(float(x) for x in v) for k, v in table.items()}
        self.strict = strict

    def _invoke(self, request: dict[str, Any]) -> dict[str, Any]:
        space = request["space"]
        if "text" in request:
            key = request["text"]
        else:
            key = hashlib.sha256(base64.b64decode(request["image_b64"])).hexdigest()
        entry = self.table.get((space, key))
        if entry is None:
            if self.strict:
                raise BackendError(
                    f"fixture embedder has no entry for space={space!r} key={key!r}"
                )
            entry = tuple(_hash_vector(f"{space}:{key}", 8))
        return {"vector": list(entry)}

"""Model-service contracts, deterministic mocks, remote clients, and the
record/replay cache."""

from .base import (
    Backend,
    BackendError,
    BackendRefusal,
    BackendSuite,
    CacheIntegrityError,
    CacheKey,
    CacheMissError,
    Completion,
    EmbedSpace,
    EmbeddingVector,
    ImageStore,
    RateLimitError,
    TransportError,
    UnsupportedSpaceError,
    canonical_request,
    cache_key,
    innermost,
    request_digest,
)
from .mock import (
    FixtureEmbedder,
    MockCaptionBackend,
    MockEmbeddingBackend,
    MockImageBackend,
    MockTextBackend,
    ScriptedTextBackend,
    deterministic_png,
)
from .remote import (
    ChatCompletionsBackend,
    RestCaptionBackend,
    RestEmbedBackend,
    RestImageBackend,
)
from .replay import (
    CACHE_MODE_ENV,
    CACHE_MODES,
    ReplayBackend,
    resolve_cache_mode,
    wrap_with_replay,
)


def build_mock_suite(
    store_root,
    seed: int = 0,
    cache_dir=None,
    cache_mode: str = "off",
    **mock_kwargs,
) -> BackendSuite:
    """Assemble a fully mocked suite, optionally behind the replay cache."""
    text = MockTextBackend(seed=seed, **mock_kwargs)
    image = MockImageBackend(seed=seed)
    captioner = MockCaptionBackend(seed=seed)
    embedder = MockEmbeddingBackend(seed=seed)
    if cache_mode != "off":
        if cache_dir is None:
            raise ValueError("cache_dir is required when cache_mode is not 'off'")
        text = wrap_with_replay(text, cache_dir, cache_mode)
        image = wrap_with_replay(image, cache_dir, cache_mode)
        captioner = wrap_with_replay(captioner, cache_dir, cache_mode)
        embedder = wrap_with_replay(embedder, cache_dir, cache_mode)
    return BackendSuite(text, image, captioner, embedder, ImageStore(store_root))

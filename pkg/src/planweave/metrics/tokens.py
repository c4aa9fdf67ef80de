"""Tokenization shared by the text metrics: lowercase, split on runs of
non-alphanumerics, drop empties."""

from __future__ import annotations

import re

TokenSequence = tuple[str, ...]

_TOKEN = re.compile(r"[a-z0-9]+")


def tokenize(text: str) -> TokenSequence:
    return tuple(_TOKEN.findall(text.lower()))

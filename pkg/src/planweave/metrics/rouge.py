"""ROUGE-L: longest-common-subsequence precision/recall/F over token
sequences. F uses beta=1 (harmonic mean); 0 when there is no overlap."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class RougeLScore:
    precision: float
    recall: float
    f: float


def lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Classic O(len(a)*len(b)) dynamic program, one rolling row."""
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for x in a:
        current = [0] * (len(b) + 1)
        for j, y in enumerate(b, start=1):
            if x == y:
                current[j] = previous[j - 1] + 1
            else:
                current[j] = max(previous[j], current[j - 1])
        previous = current
    return previous[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> RougeLScore:
    if not candidate or not reference:
        raise ValueError("rouge_l requires non-empty token sequences")
    overlap = lcs_length(candidate, reference)
    precision = overlap / len(candidate)
    recall = overlap / len(reference)
    if precision + recall == 0:
        return RougeLScore(0.0, 0.0, 0.0)
    f = 2 * precision * recall / (precision + recall)
    return RougeLScore(precision, recall, f)

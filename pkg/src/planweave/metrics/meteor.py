"""METEOR with exact-match unigram alignment (no stemming or synonymy).

The alignment maximizes the number of matched tokens, then minimizes the
number of chunks (maximal runs contiguous in both sequences). Chunk
minimization runs an exact branch-and-bound search; a generous node budget
keeps pathological inputs bounded while staying deterministic.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from typing import Sequence

_NODE_BUDGET = 250_000


def _min_chunks(candidate: Sequence[str], reference: Sequence[str]) -> tuple[int, int]:
    """Return (matches, minimal chunk count) over all maximum matchings."""
    cand_counts = Counter(candidate)
    ref_counts = Counter(reference)
    needed = {
        w: min(cand_counts[w], ref_counts[w]) for w in cand_counts if w in ref_counts
    }
    total_matches = sum(needed.values())
    if total_matches == 0:
        return 0, 0

    ref_positions: dict[str, list[int]] = defaultdict(list)
    for j, w in enumerate(reference):
        ref_positions[w].append(j)

    n = len(candidate)
    # occurrences of candidate[i] at positions >= i, to know when a skip
    # would forfeit a required match
    occ_after = [0] * n
    running: Counter[str] = Counter()
    for i in range(n - 1, -1, -1):
        running[candidate[i]] += 1
        occ_after[i] = running[candidate[i]]

    best = [total_matches]  # upper bound: every match its own chunk
    nodes = [0]
    used = [False] * len(reference)

    def dfs(i: int, last_j: int, chunks: int, remaining: int) -> None:
        if chunks >= best[0]:
            return
        nodes[0] += 1
        if nodes[0] > _NODE_BUDGET:
            return
        if remaining == 0 or i == n:
            if remaining == 0:
                best[0] = chunks
            return
        word = candidate[i]
        need = needed.get(word, 0)
        if need > 0:
            positions = ref_positions[word]
            # try extending the current run first so good solutions prune early
            ordered = positions
            if last_j >= 0 and last_j + 1 < len(reference) and reference[last_j + 1] == word:
                ordered = [last_j + 1] + [j for j in positions if j != last_j + 1]
            for j in ordered:
                if used[j]:
                    continue
                new_chunks = chunks if j == last_j + 1 else chunks + 1
                if new_chunks >= best[0]:
                    continue
                used[j] = True
                needed[word] = need - 1
                dfs(i + 1, j, new_chunks, remaining - 1)
                needed[word] = need
                used[j] = False
        # skipping is allowed only when later occurrences still cover the need
        if need == 0 or occ_after[i] - 1 >= need:
            dfs(i + 1, -2, chunks, remaining)

    dfs(0, -2, 0, total_matches)
    return total_matches, best[0]


def meteor(
    candidate: Sequence[str],
    reference: Sequence[str],
    alpha: float = 0.9,
    gamma: float = 0.5,
    theta: float = 3.0,
) -> float:
    """Score in [0, 1]; exactly 0 when no token matches."""
    if not candidate or not reference:
        raise ValueError("meteor requires non-empty token sequences")
    matches, chunks = _min_chunks(candidate, reference)
    if matches == 0:
        return 0.0
    precision = matches / len(candidate)
    recall = matches / len(reference)
    f_mean = precision * recall / (alpha * precision + (1 - alpha) * recall)
    penalty = gamma * (chunks / matches) ** theta
    return f_mean * (1.0 - penalty)

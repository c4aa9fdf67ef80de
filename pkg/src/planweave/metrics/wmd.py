"""Word Mover's Distance: optimal transport between the normalized
bag-of-words distributions of two documents, with Euclidean ground cost
between word embeddings.

The transport problem is solved exactly with the transportation simplex
(northwest-corner start, u-v potentials, cycle pivots), so results match
LP-oracle values to solver tolerance.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict, deque
from typing import Callable, Mapping, Sequence

import numpy as np

REDUCED_COST_TOL = 1e-12


class WmdBudgetError(ValueError):
    """The combined vocabulary exceeds the configured solver budget."""


class MissingWordError(KeyError):
    """A word has no embedding and the missing-word policy is 'error'."""


def solve_transport(
    supply: Sequence[float],
    demand: Sequence[float],
    cost: Sequence[Sequence[float]],
) -> tuple[float, dict[tuple[int, int], float]]:
    """Minimize sum(T[i][j] * cost[i][j]) subject to row sums = supply,
    column sums = demand, T >= 0. Returns (optimal value, transport plan).

    Supplies and demands must balance; tiny float drift is folded into the
    last demand entry.
    """
    m, n = len(supply), len(demand)
    if m == 0 or n == 0:
        raise ValueError("transport problem needs at least one supply and demand")
    s = [float(x) for x in supply]
    d = [float(x) for x in demand]
    d[-1] += sum(s) - sum(d)

    # northwest-corner initial basis: a staircase of exactly m + n - 1 cells,
    # keeping zero-allocation cells on degenerate ties
    alloc: dict[tuple[int, int], float] = {}
    basis: list[tuple[int, int]] = []
    i = j = 0
    while True:
        q = min(s[i], d[j])
        basis.append((i, j))
        alloc[(i, j)] = q
        s[i] -= q
        d[j] -= q
        if i == m - 1 and j == n - 1:
            break
        if s[i] == 0.0 and i < m - 1:
            i += 1
        elif j < n - 1:
            j += 1
        else:
            i += 1

    cost_matrix = np.asarray(cost, dtype=float)
    basic_mask = np.zeros((m, n), dtype=bool)
    for a, b in basis:
        basic_mask[a, b] = True

    max_iter = 1000 + 50 * (m + n) * (m + n)
    for _ in range(max_iter):
        u, v = _potentials(basis, cost, m, n)
        reduced = cost_matrix - np.asarray(u)[:, None] - np.asarray(v)[None, :]
        reduced[basic_mask] = np.inf
        flat = int(np.argmin(reduced))  # first minimum in row-major order
        entering = (flat // n, flat % n)
        if reduced[entering] >= -REDUCED_COST_TOL:
            break
        cycle = _find_cycle(basis, entering)
        minus = cycle[1::2]
        theta = min(alloc[c] for c in minus)
        leaving = min(c for c in minus if alloc[c] <= theta)
        for k, c in enumerate(cycle):
            if k == 0:
                continue
            if k % 2:
                alloc[c] -= theta
            else:
                alloc[c] += theta
        alloc[entering] = theta
        del alloc[leaving]
        basic_mask[leaving] = False
        basic_mask[entering] = True
        basis = [c for c in basis if c != leaving]
        basis.append(entering)
    else:
        raise RuntimeError("transportation simplex failed to converge")

    value = sum(q * cost[a][b] for (a, b), q in alloc.items())
    return value, alloc


def _potentials(
    basis: Sequence[tuple[int, int]],
    cost: Sequence[Sequence[float]],
    m: int,
    n: int,
) -> tuple[list[float], list[float]]:
    adj_row: dict[int, list[int]] = defaultdict(list)
    adj_col: dict[int, list[int]] = defaultdict(list)
    for a, b in basis:
        adj_row[a].append(b)
        adj_col[b].append(a)
    u: list[float | None] = [None] * m
    v: list[float | None] = [None] * n
    u[0] = 0.0
    queue: deque[tuple[str, int]] = deque([("r", 0)])
    while queue:
        kind, idx = queue.popleft()
        if kind == "r":
            for b in adj_row[idx]:
                if v[b] is None:
                    v[b] = cost[idx][b] - u[idx]  # type: ignore[operator]
                    queue.append(("c", b))
        else:
            for a in adj_col[idx]:
                if u[a] is None:
                    u[a] = cost[a][idx] - v[idx]  # type: ignore[operator]
                    queue.append(("r", a))
    if any(x is None for x in u) or any(x is None for x in v):
        raise RuntimeError("degenerate basis: potential system is disconnected")
    return u, v  # type: ignore[return-value]


def _find_cycle(
    basis: Sequence[tuple[int, int]], entering: tuple[int, int]
) -> list[tuple[int, int]]:
    """Unique alternating cycle created by adding ``entering`` to the basis
    tree; returned with the entering cell first, then cells ordered so signs
    alternate +, -, +, -, ..."""
    graph: dict[tuple[str, int], list[tuple[tuple[str, int], tuple[int, int]]]] = defaultdict(list)
    for a, b in basis:
        graph[("r", a)].append((("c", b), (a, b)))
        graph[("c", b)].append((("r", a), (a, b)))
    start = ("r", entering[0])
    target = ("c", entering[1])
    stack: list[tuple[tuple[str, int], list[tuple[int, int]]]] = [(start, [])]
    seen = {start}
    path: list[tuple[int, int]] | None = None
    while stack:
        node, cells = stack.pop()
        if node == target:
            path = cells
            break
        for neighbor, cell in graph[node]:
            if neighbor not in seen:
                seen.add(neighbor)
                stack.append((neighbor, cells + [cell]))
    if path is None:
        raise RuntimeError("basis is not connected; no pivot cycle found")
    return [entering] + list(reversed(path))


def nbow_weights(tokens: Sequence[str]) -> dict[str, float]:
    """Normalized bag-of-words weights: count / total count."""
    counts = Counter(tokens)
    total = sum(counts.values())
    return {w: c / total for w, c in counts.items()}


def wmd(
    doc_a: Sequence[str],
    doc_b: Sequence[str],
    embed_word: Callable[[str], Sequence[float]] | Mapping[str, Sequence[float]],
    budget: int = 200,
    missing: str = "error",
) -> float:
    """Word Mover's Distance between two token sequences.

    ``embed_word`` maps a word to its vector (callable or mapping). Words
    without embeddings follow the ``missing`` policy: ``"error"`` raises,
    ``"skip"`` drops them and renormalizes the remaining weights.
    """
    if not doc_a or not doc_b:
        raise ValueError("wmd requires non-empty token sequences")
    if missing not in ("error", "skip"):
        raise ValueError("missing policy must be 'error' or 'skip'")

    lookup = embed_word.__getitem__ if isinstance(embed_word, Mapping) else embed_word

    def embed_all(tokens: Sequence[str]) -> tuple[list[str], dict[str, np.ndarray]]:
        vocab: list[str] = []
        vectors: dict[str, np.ndarray] = {}
        for w in dict.fromkeys(tokens):
            try:
                vectors[w] = np.asarray(lookup(w), dtype=float)
            except KeyError:
                if missing == "error":
                    raise MissingWordError(f"no embedding for word '{w}'") from None
                continue
            vocab.append(w)
        if not vocab:
            raise ValueError("no embeddable words left after applying skip policy")
        return vocab, vectors

    vocab_a, vecs_a = embed_all(doc_a)
    vocab_b, vecs_b = embed_all(doc_b)
    if len(set(vocab_a) | set(vocab_b)) > budget:
        raise WmdBudgetError(
            f"combined vocabulary {len(set(vocab_a) | set(vocab_b))} exceeds "
            f"solver budget {budget}"
        )

    weights_a = nbow_weights([w for w in doc_a if w in vecs_a])
    weights_b = nbow_weights([w for w in doc_b if w in vecs_b])
    supply = [weights_a[w] for w in vocab_a]
    demand = [weights_b[w] for w in vocab_b]
    cost = [
        [float(np.linalg.norm(vecs_a[wa] - vecs_b[wb])) for wb in vocab_b]
        for wa in vocab_a
    ]
    value, _ = solve_transport(supply, demand, cost)
    return max(0.0, value)


def wmd_similarity(distance: float) -> float:
    """Similarity orientation of the distance: 1 / (1 + d)."""
    if distance < 0 or not math.isfinite(distance):
        raise ValueError("distance must be finite and non-negative")
    return 1.0 / (1.0 + distance)

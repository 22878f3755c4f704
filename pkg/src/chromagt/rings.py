"""Ring (chordless cycle) enumeration and the derived pair features.

A ring is an induced cycle: consecutive nodes are adjacent and no other
pair of ring nodes is. Two nodes are ring-bound when some ring contains
both; the boolean co-membership matrix built from that relation is what the
edge encoder consumes, either by embedding the bit additively or by pairing
it with the bond category into a doubled vocabulary.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .graphs import Graph


def canonical_cycle(cycle: tuple[int, ...]) -> tuple[int, ...]:
    """Rotation/reflection-minimal form: start at the smallest node, walk
    toward its smaller cycle neighbor."""
    k = len(cycle)
    start = cycle.index(min(cycle))
    fwd = tuple(cycle[(start + i) % k] for i in range(k))
    bwd = tuple(cycle[(start - i) % k] for i in range(k))
    return min(fwd, bwd)


def enumerate_rings(g: Graph, max_size: int) -> tuple[tuple[int, ...], ...]:
    """All chordless cycles of length 3..max_size, each once, in canonical
    form, sorted for a deterministic order.

    DFS rooted at the smallest cycle node: a path is only extended by nodes
    that are larger than the root and non-adjacent to the path interior, so
    any closure back to the root is chordless by construction.
    """
    if not (3 <= max_size <= 24):
        raise ConfigError(f"max ring size must be in [3, 24], got {max_size}")
    n = g.num_nodes
    adj: list[set[int]] = [set() for _ in range(n)]
    for u, v, _ in g.edges:
        adj[u].add(v)
        adj[v].add(u)

    found: set[tuple[int, ...]] = set()

    def extend(root: int, path: list[int], on_path: set[int]) -> None:
        last = path[-1]
        for nxt in adj[last]:
            if nxt <= root or nxt in on_path:
                continue
            # A chord back to any non-consecutive path node disqualifies nxt.
            if any(p in adj[nxt] for p in path[:-1]):
                continue
            if root in adj[nxt]:
                if len(path) + 2 <= max_size:
                    found.add(canonical_cycle((root, *path, nxt)))
                # Extending past a root neighbor would close with a chord.
                continue
            # After pushing nxt the shortest possible closure has length
            # len(path) + 3.
            if len(path) + 3 <= max_size:
                path.append(nxt)
                on_path.add(nxt)
                extend(root, path, on_path)
                on_path.remove(nxt)
                path.pop()

    for root in range(n):
        for first in adj[root]:
            if first > root:
                extend(root, [first], {root, first})
    return tuple(sorted(found))


def ring_comembership(
    rings: tuple[tuple[int, ...], ...], num_nodes: int, include_self: bool = True
) -> np.ndarray:
    """Symmetric boolean matrix: entry (i, j) set when some ring holds both.

    The diagonal marks ring membership itself when include_self is on (the
    relation alone is not reflexive); switch it off to leave the diagonal
    clear.
    """
    bound = np.zeros((num_nodes, num_nodes), dtype=bool)
    for ring in rings:
        idx = np.fromiter(ring, dtype=np.int64)
        if idx.size and idx.max() >= num_nodes:
            raise ConfigError("ring references a node outside the graph")
        bound[np.ix_(idx, idx)] = True
    if not include_self:
        np.fill_diagonal(bound, False)
    return bound


def paired_bond_ids(bond_ids: np.ndarray, bound: np.ndarray) -> np.ndarray:
    """Cartesian pairing of bond category and ring bit: id = 2*bond + bit.

    Doubles the edge vocabulary; the layout is fixed so checkpoints stay
    compatible across runs.
    """
    if not np.issubdtype(bond_ids.dtype, np.integer):
        raise ConfigError(
            "categorical ring encoding needs integer bond categories, "
            f"got dtype {bond_ids.dtype}"
        )
    return 2 * bond_ids + bound.astype(np.int64)


def ring_edge_encoding(bond_ids: np.ndarray, bound: np.ndarray,
                       mode: str) -> np.ndarray:
    """Pair-feature ids carrying ring information.

    additive: the bare 0/1 co-membership bits, to be embedded (two learned
    vectors) and added onto the bond embedding of every pair. categorical:
    bond and bit fused into one id over a doubled vocabulary.
    """
    if mode == "additive":
        return bound.astype(np.int64)
    if mode == "categorical":
        return paired_bond_ids(bond_ids, bound)
    raise ConfigError(f"unknown ring encoding mode {mode!r}")


def brute_force_rings(g: Graph, max_size: int) -> tuple[tuple[int, ...], ...]:
    """Independent oracle: test every vertex subset for being an induced
    cycle. Exponential; only for small test graphs."""
    from itertools import combinations

    n = g.num_nodes
    adj = np.zeros((n, n), dtype=bool)
    for u, v, _ in g.edges:
        adj[u, v] = adj[v, u] = True

    out = []
    for size in range(3, min(max_size, n) + 1):
        for subset in combinations(range(n), size):
            sub = adj[np.ix_(subset, subset)]
            if not (sub.sum(axis=0) == 2).all():
                continue
            # Degree-2 everywhere means a disjoint union of cycles; connected
            # is then equivalent to being a single cycle.
            order = [0]
            prev = -1
            while True:
                nbrs = [j for j in range(size) if sub[order[-1], j] and j != prev]
                nxt = nbrs[0]
                if nxt == 0:
                    break
                prev = order[-1]
                order.append(nxt)
            if len(order) == size:
                out.append(canonical_cycle(tuple(subset[i] for i in order)))
    return tuple(sorted(out))

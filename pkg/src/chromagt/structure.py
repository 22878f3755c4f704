"""Pairwise structural descriptors computed once per graph.

Two families are precomputed: the stack of successive random-walk matrix
powers, and the all-pairs BFS shortest-path distance matrix with sentinel
codes. Both feed the pairwise positional encodings and the node-wise
return-probability features; everything here is pure and immutable, so
per-graph preprocessing can run in parallel with no shared state.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .graphs import Graph, adjacency_matrix, degree_vector

# Shortest-path sentinel codes: the diagonal is SELF; anything beyond the
# cap (or disconnected) is cap + 1.
SPD_SELF = 0


def spd_unreachable(cap: int) -> int:
    return cap + 1


def random_walk_matrix(g: Graph) -> np.ndarray:
    """Row-stochastic transition matrix A / degree.

    Rows of isolated nodes are all zero rather than self-looping, keeping
    every entry interpretable as a walk probability.
    """
    a = adjacency_matrix(g)
    deg = degree_vector(g)
    rw = np.zeros_like(a)
    nz = deg > 0
    rw[nz] = a[nz] / deg[nz, None]
    return rw


def random_walk_powers(rw: np.ndarray, steps: int) -> np.ndarray:
    """Stack rw^1 .. rw^steps, shape (steps, N, N).

    Computed by repeated 64-bit multiplication; for a pair i != j the index
    of the first nonzero power equals the BFS distance (when <= steps), and
    the diagonal of the k-th power is the k-step return probability.
    """
    if steps < 1:
        raise ConfigError(f"random-walk steps must be >= 1, got {steps}")
    n = rw.shape[0]
    powers = np.empty((steps, n, n), dtype=np.float64)
    powers[0] = rw
    for k in range(1, steps):
        powers[k] = powers[k - 1] @ rw
    return powers


def all_pairs_shortest_path(g: Graph, cap: int) -> np.ndarray:
    """BFS from every node; integer matrix with SELF on the diagonal and
    cap + 1 for pairs farther than cap or disconnected."""
    n = g.num_nodes
    neighbors: list[list[int]] = [[] for _ in range(n)]
    for u, v, _ in g.edges:
        neighbors[u].append(v)
        neighbors[v].append(u)
    far = spd_unreachable(cap)
    spd = np.full((n, n), far, dtype=np.int64)
    for src in range(n):
        spd[src, src] = SPD_SELF
        seen = {src}
        queue = deque([(src, 0)])
        while queue:
            node, dist = queue.popleft()
            if dist >= cap:
                continue
            for nb in neighbors[node]:
                if nb not in seen:
                    seen.add(nb)
                    spd[src, nb] = dist + 1
                    queue.append((nb, dist + 1))
    return spd


def node_return_probabilities(powers: np.ndarray) -> np.ndarray:
    """Per-node diagonal of every power: row i is [rw^1_ii, ..., rw^p_ii].

    This is the node-wise positional encoding; with no self-loops the first
    column is always zero.
    """
    return np.ascontiguousarray(np.diagonal(powers, axis1=1, axis2=2).T)


@dataclass(frozen=True)
class GraphStructure:
    """Precomputed descriptors for one graph.

    rw_powers: (steps, N, N) random-walk powers
    spd:       (N, N) integer distances with sentinels, cap = spd_cap
    rings:     canonical chordless cycles up to max_ring_size, or None when
               ring features were not requested
    """

    rw_powers: np.ndarray
    spd: np.ndarray
    spd_cap: int
    rings: tuple[tuple[int, ...], ...] | None = None
    max_ring_size: int | None = None

    @property
    def steps(self) -> int:
        return self.rw_powers.shape[0]

    @property
    def num_nodes(self) -> int:
        return self.spd.shape[0]

    def node_pe(self, steps: int) -> np.ndarray:
        if steps > self.steps:
            raise ConfigError(
                f"structure holds {self.steps} random-walk steps, "
                f"node encoding needs {steps}"
            )
        return node_return_probabilities(self.rw_powers[:steps])

    def pair_probabilities(self, steps: int) -> np.ndarray:
        """(N, N, steps) view of the power stack for pairwise encodings."""
        if steps > self.steps:
            raise ConfigError(
                f"structure holds {self.steps} random-walk steps, "
                f"pair encoding needs {steps}"
            )
        return np.ascontiguousarray(np.moveaxis(self.rw_powers[:steps], 0, 2))


def compute_structure(
    g: Graph, steps: int, max_ring_size: int | None = None
) -> GraphStructure:
    """One-shot preprocessing for a graph: walks, distances and rings."""
    from .rings import enumerate_rings  # local import to avoid a cycle

    rw = random_walk_matrix(g)
    powers = random_walk_powers(rw, steps)
    spd = all_pairs_shortest_path(g, cap=steps)
    rings = None
    if max_ring_size is not None:
        rings = enumerate_rings(g, max_ring_size)
    return GraphStructure(
        rw_powers=powers,
        spd=spd,
        spd_cap=steps,
        rings=rings,
        max_ring_size=max_ring_size,
    )


@dataclass(frozen=True)
class PreparedGraph:
    """A graph paired with its precomputed structure, ready for the model."""

    graph: Graph
    structure: GraphStructure

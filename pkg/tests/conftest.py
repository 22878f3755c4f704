import numpy as np
import pytest

from chromagt import Graph


def path_graph(n: int, bond: int = 0) -> Graph:
    return Graph(
        num_nodes=n,
        node_feats=tuple((0,) for _ in range(n)),
        edges=tuple((i, i + 1, bond) for i in range(n - 1)),
    )


def cycle_graph(n: int, bonds=None) -> Graph:
    bonds = bonds or [0] * n
    edges = []
    for i in range(n):
        u, v = i, (i + 1) % n
        if u > v:
            u, v = v, u
        edges.append((u, v, bonds[i]))
    return Graph(
        num_nodes=n,
        node_feats=tuple((0,) for _ in range(n)),
        edges=tuple(sorted(edges)),
    )


def complete_graph(n: int) -> Graph:
    return Graph(
        num_nodes=n,
        node_feats=tuple((0,) for _ in range(n)),
        edges=tuple((u, v, 0) for u in range(n) for v in range(u + 1, n)),
    )


def random_graph(rng: np.random.Generator, n: int, p: float = 0.35,
                 num_bond_types: int = 3, connected: bool = False) -> Graph:
    while True:
        edges = []
        for u in range(n):
            for v in range(u + 1, n):
                if rng.random() < p:
                    edges.append((u, v, int(rng.integers(0, num_bond_types))))
        g = Graph(
            num_nodes=n,
            node_feats=tuple((int(t),) for t in rng.integers(0, 4, size=n)),
            edges=tuple(edges),
        )
        if not connected or _is_connected(g):
            return g


def _is_connected(g: Graph) -> bool:
    if g.num_nodes == 1:
        return True
    adj = [[] for _ in range(g.num_nodes)]
    for u, v, _ in g.edges:
        adj[u].append(v)
        adj[v].append(u)
    seen = {0}
    stack = [0]
    while stack:
        for nb in adj[stack.pop()]:
            if nb not in seen:
                seen.add(nb)
                stack.append(nb)
    return len(seen) == g.num_nodes


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

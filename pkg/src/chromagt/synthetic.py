"""Seeded synthetic graph tasks for desk-scale experiments.

ring-regression and triangle-regression produce sparse molecule-like
graphs whose targets are computed with independent oracles (networkx cycle
enumeration, direct triple counting), never with this package's own ring
code. sbm-cluster is a two-block stochastic block model node labelling
task with one revealed seed node per block.
"""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .errors import ConfigError
from .graphs import Dataset, Graph

TASK_KINDS = ("ring-regression", "triangle-regression", "sbm-cluster")

NUM_NODE_TYPES = 5
NUM_BOND_TYPES = 4
RING_TARGET_MAX_SIZE = 6


@dataclass(frozen=True)
class SyntheticTaskSpec:
    kind: str = "ring-regression"
    count: int = 300
    min_nodes: int = 8
    max_nodes: int = 24
    seed: int = 0

    def validate(self) -> None:
        if self.kind not in TASK_KINDS:
            raise ConfigError(f"unknown synthetic task {self.kind!r}")
        if self.count < 1 or self.min_nodes < 2 or self.max_nodes < self.min_nodes:
            raise ConfigError("bad synthetic task sizes")


def _to_nx(g: Graph) -> nx.Graph:
    gx = nx.Graph()
    gx.add_nodes_from(range(g.num_nodes))
    gx.add_edges_from((u, v) for u, v, _ in g.edges)
    return gx


def chordless_cycle_count(g: Graph, max_size: int = RING_TARGET_MAX_SIZE) -> int:
    """Independent ring count: networkx chordless-cycle enumeration."""
    return sum(1 for c in nx.chordless_cycles(_to_nx(g), length_bound=max_size))


def triangle_count(g: Graph) -> int:
    return sum(nx.triangles(_to_nx(g)).values()) // 3


def mean_degree(g: Graph) -> float:
    return 2.0 * len(g.edges) / g.num_nodes


def ring_regression_target(g: Graph) -> float:
    return chordless_cycle_count(g) + 0.5 * mean_degree(g)


def _sparse_graph(rng: np.random.Generator, min_nodes: int, max_nodes: int):
    """Random tree plus a few extra edges, so some graphs carry cycles."""
    n = int(rng.integers(min_nodes, max_nodes + 1))
    edges: dict[tuple[int, int], int] = {}
    for v in range(1, n):
        u = int(rng.integers(0, v))
        edges[(u, v)] = int(rng.integers(0, NUM_BOND_TYPES))
    extra = int(rng.integers(0, 4))
    attempts = 0
    while len(edges) < n - 1 + extra and attempts < 10 * (extra + 1):
        attempts += 1
        u, v = sorted(rng.choice(n, size=2, replace=False).tolist())
        if (u, v) not in edges:
            edges[(u, v)] = int(rng.integers(0, NUM_BOND_TYPES))
    feats = tuple((int(t),) for t in rng.integers(0, NUM_NODE_TYPES, size=n))
    edge_list = tuple(sorted((u, v, b) for (u, v), b in edges.items()))
    return n, feats, edge_list


def _sbm_graph(rng: np.random.Generator, min_nodes: int, max_nodes: int,
               p_in: float = 0.55, p_out: float = 0.08):
    n = int(rng.integers(min_nodes, max_nodes + 1))
    half = n // 2
    blocks = np.array([0] * half + [1] * (n - half))
    edges = []
    for u in range(n):
        for v in range(u + 1, n):
            p = p_in if blocks[u] == blocks[v] else p_out
            if rng.random() < p:
                edges.append((u, v, 0))
    # One revealed node per block; feature 0 means "unknown".
    feats = [[0] for _ in range(n)]
    feats[int(rng.integers(0, half))][0] = 1
    feats[int(rng.integers(half, n))][0] = 2
    return (
        n,
        tuple(tuple(f) for f in feats),
        tuple(sorted(edges)),
        tuple(int(b) for b in blocks),
    )


def generate_synthetic(spec: SyntheticTaskSpec) -> Dataset:
    """Deterministic dataset: fully reproducible from the task seed."""
    spec.validate()
    rng = np.random.default_rng([spec.seed, 0x5B])
    graphs: list[Graph] = []
    for _ in range(spec.count):
        if spec.kind == "sbm-cluster":
            n, feats, edges, blocks = _sbm_graph(rng, spec.min_nodes, spec.max_nodes)
            g = Graph(num_nodes=n, node_feats=feats, edges=edges, target=blocks)
        else:
            n, feats, edges = _sparse_graph(rng, spec.min_nodes, spec.max_nodes)
            g = Graph(num_nodes=n, node_feats=feats, edges=edges)
            if spec.kind == "ring-regression":
                target = ring_regression_target(g)
            else:
                target = float(triangle_count(g))
            g = Graph(num_nodes=n, node_feats=feats, edges=edges, target=target)
        g.validate(len(graphs))
        graphs.append(g)

    # Deterministic 80/10/10 split drawn from the generator's own stream.
    n_total = len(graphs)
    n_train = int(0.8 * n_total)
    n_val = int(0.1 * n_total)
    order = rng.permutation(n_total)
    splits = [""] * n_total
    for rank, idx in enumerate(order):
        if rank < n_train:
            splits[idx] = "train"
        elif rank < n_train + n_val:
            splits[idx] = "val"
        else:
            splits[idx] = "test"
    return Dataset(graphs=tuple(graphs), splits=tuple(splits))


def task_kind(spec_kind: str) -> str:
    """Model task matching a synthetic task."""
    return "node_class" if spec_kind == "sbm-cluster" else "regression"

"""Graph data model and JSONL dataset ingestion.

Graphs are undirected, with categorical node features (one or more integer
fields per node) and a categorical bond type per edge. Each edge is stored
once with u < v and symmetrized on demand. Graphs and datasets are immutable
after construction and safe to share across workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DatasetError

SPLITS = ("train", "val", "test")

# Fixed seed for the default split rule so a file without split tags always
# maps to the same train/val/test assignment.
_DEFAULT_SPLIT_SEED = 20_240_817


@dataclass(frozen=True)
class Graph:
    """One undirected graph with categorical features and an optional target.

    node_feats holds, for every node, a tuple of categorical ids (molecular
    datasets carry several categorical fields per atom). target is a float
    for graph regression, a tuple of per-node class ids for node
    classification, or None.
    """

    num_nodes: int
    node_feats: tuple[tuple[int, ...], ...]
    edges: tuple[tuple[int, int, int], ...]
    target: float | tuple[int, ...] | None = None

    def validate(self, index: int | None = None) -> None:
        where = f"graph {index}" if index is not None else "graph"
        if self.num_nodes < 1:
            raise DatasetError(f"{where}: num_nodes must be >= 1")
        if len(self.node_feats) != self.num_nodes:
            raise DatasetError(
                f"{where}: node_feats has {len(self.node_feats)} rows for "
                f"{self.num_nodes} nodes"
            )
        for feats in self.node_feats:
            if any(f < 0 for f in feats):
                raise DatasetError(f"{where}: node_feats contains a negative id")
        seen: set[tuple[int, int]] = set()
        for u, v, bond in self.edges:
            if not (0 <= u < self.num_nodes and 0 <= v < self.num_nodes):
                raise DatasetError(f"{where}: edge ({u},{v}) out of range")
            if u == v:
                raise DatasetError(f"{where}: edges: self-loop at node {u}")
            if u > v:
                raise DatasetError(f"{where}: edges: pair ({u},{v}) not stored u < v")
            if (u, v) in seen:
                raise DatasetError(f"{where}: edges: duplicate edge ({u},{v})")
            if bond < 0:
                raise DatasetError(f"{where}: edges: negative bond type")
            seen.add((u, v))
        if isinstance(self.target, tuple) and len(self.target) != self.num_nodes:
            raise DatasetError(
                f"{where}: target has {len(self.target)} labels for "
                f"{self.num_nodes} nodes"
            )


@dataclass(frozen=True)
class Dataset:
    """An ordered collection of graphs with disjoint train/val/test tags."""

    graphs: tuple[Graph, ...]
    splits: tuple[str, ...]

    def __post_init__(self):
        if len(self.graphs) != len(self.splits):
            raise DatasetError("splits must tag every graph")
        for s in self.splits:
            if s not in SPLITS:
                raise DatasetError(f"unknown split tag {s!r}")

    def __len__(self) -> int:
        return len(self.graphs)

    def indices(self, split: str) -> list[int]:
        return [i for i, s in enumerate(self.splits) if s == split]

    def split_sizes(self) -> dict[str, int]:
        return {s: len(self.indices(s)) for s in SPLITS}


def _normalize_edge(raw, where: str) -> tuple[int, int, int]:
    if not (isinstance(raw, (list, tuple)) and len(raw) == 3):
        raise DatasetError(f"{where}: edges entries must be [u, v, bond]")
    u, v, bond = (int(x) for x in raw)
    if u > v:
        u, v = v, u
    return u, v, bond


def graph_from_record(record: dict, task: str, index: int | None = None) -> Graph:
    """Build and validate a Graph from one decoded JSONL record."""
    where = f"graph {index}" if index is not None else "graph"
    try:
        num_nodes = int(record["num_nodes"])
        node_feats = tuple(tuple(int(f) for f in row) for row in record["node_feats"])
        edges = tuple(_normalize_edge(e, where) for e in record["edges"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"{where}: bad record: {exc}") from exc

    target: float | tuple[int, ...] | None = None
    if "y" in record and record["y"] is not None:
        y = record["y"]
        if task == "regression":
            if isinstance(y, (list, tuple)):
                raise DatasetError(f"{where}: field y: expected a number, got a list")
            target = float(y)
        elif task == "node_class":
            if not isinstance(y, (list, tuple)):
                raise DatasetError(f"{where}: field y: expected per-node labels")
            target = tuple(int(c) for c in y)
        else:
            raise DatasetError(f"unknown task kind {task!r}")

    g = Graph(num_nodes=num_nodes, node_feats=node_feats, edges=edges, target=target)
    g.validate(index)
    return g


def assign_default_splits(n: int, tagged: dict[int, str] | None = None) -> list[str]:
    """Deterministic 80/10/10 assignment by line index.

    Explicit tags are honored and consume their quota; untagged lines fill
    the remaining train, then val, then test slots in a seeded-permutation
    order, so an untagged n-line file splits into exactly
    floor(.8n)/floor(.1n)/rest.
    """
    tagged = tagged or {}
    quota = {"train": int(0.8 * n), "val": int(0.1 * n)}
    quota["test"] = n - quota["train"] - quota["val"]
    for s in tagged.values():
        quota[s] -= 1

    untagged = [i for i in range(n) if i not in tagged]
    order = np.random.default_rng(_DEFAULT_SPLIT_SEED).permutation(len(untagged))
    out = [""] * n
    for i, s in tagged.items():
        out[i] = s
    remaining = {s: max(0, quota[s]) for s in SPLITS}
    for j in order:
        i = untagged[j]
        for s in SPLITS:
            if remaining[s] > 0:
                remaining[s] -= 1
                out[i] = s
                break
        else:
            out[i] = "train"
    return out


def load_dataset(path, task: str = "regression") -> Dataset:
    """Load a JSONL graph file: one record per line.

    Record format:
      {"num_nodes": int, "node_feats": [[int,...],...],
       "edges": [[u,v,bond],...], "y": float | [int,...],
       "split": "train"|"val"|"test"}   # split optional
    """
    graphs: list[Graph] = []
    tagged: dict[int, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DatasetError(f"line {lineno}: invalid JSON: {exc.msg}") from exc
            index = len(graphs)
            graphs.append(graph_from_record(record, task, index))
            if "split" in record:
                tag = record["split"]
                if tag not in SPLITS:
                    raise DatasetError(f"line {lineno}: unknown split {tag!r}")
                tagged[index] = tag
    splits = assign_default_splits(len(graphs), tagged)
    return Dataset(graphs=tuple(graphs), splits=tuple(splits))


def save_dataset(dataset: Dataset, path) -> None:
    """Write a dataset back to JSONL, including split tags."""
    with open(path, "w", encoding="utf-8") as fh:
        for g, split in zip(dataset.graphs, dataset.splits):
            y: float | list[int] | None
            if isinstance(g.target, tuple):
                y = list(g.target)
            else:
                y = g.target
            record = {
                "num_nodes": g.num_nodes,
                "node_feats": [list(row) for row in g.node_feats],
                "edges": [list(e) for e in g.edges],
                "y": y,
                "split": split,
            }
            fh.write(json.dumps(record, sort_keys=True) + "\n")


def adjacency_matrix(g: Graph) -> np.ndarray:
    """Symmetric 0/1 matrix with zero diagonal."""
    a = np.zeros((g.num_nodes, g.num_nodes), dtype=np.float64)
    for u, v, _ in g.edges:
        a[u, v] = 1.0
        a[v, u] = 1.0
    return a


def degree_vector(g: Graph) -> np.ndarray:
    return adjacency_matrix(g).sum(axis=1)


def bond_type_count(g: Graph) -> int:
    return max((bond for _, _, bond in g.edges), default=-1) + 1


def permute_graph(g: Graph, perm: list[int]) -> Graph:
    """Relabel nodes: new id perm[i] for old id i. Used by equivariance tests."""
    inv = [0] * g.num_nodes
    for old, new in enumerate(perm):
        inv[new] = old
    node_feats = tuple(g.node_feats[inv[new]] for new in range(g.num_nodes))
    edges = []
    for u, v, bond in g.edges:
        pu, pv = perm[u], perm[v]
        if pu > pv:
            pu, pv = pv, pu
        edges.append((pu, pv, bond))
    target = g.target
    if isinstance(target, tuple):
        target = tuple(target[inv[new]] for new in range(g.num_nodes))
    return Graph(
        num_nodes=g.num_nodes,
        node_feats=node_feats,
        edges=tuple(sorted(edges)),
        target=target,
    )

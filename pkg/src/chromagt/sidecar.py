"""Preprocessing sidecar files: per-graph structural descriptors serialized
next to a dataset.

The format is versioned JSON; floats are serialized with repr so the walk
probabilities round-trip bit-exact in 64-bit. One sidecar entry per graph,
in dataset order.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import VersionError
from .graphs import Dataset
from .structure import GraphStructure, compute_structure

SIDECAR_VERSION = 1


def structure_to_record(s: GraphStructure) -> dict:
    return {
        "rw_powers": s.rw_powers.tolist(),
        "spd": s.spd.tolist(),
        "spd_cap": s.spd_cap,
        "rings": [list(r) for r in s.rings] if s.rings is not None else None,
        "max_ring_size": s.max_ring_size,
    }


def structure_from_record(record: dict) -> GraphStructure:
    rings = record.get("rings")
    return GraphStructure(
        rw_powers=np.array(record["rw_powers"], dtype=np.float64),
        spd=np.array(record["spd"], dtype=np.int64),
        spd_cap=int(record["spd_cap"]),
        rings=tuple(tuple(r) for r in rings) if rings is not None else None,
        max_ring_size=record.get("max_ring_size"),
    )


def build_sidecar(dataset: Dataset, steps: int,
                  max_ring_size: int | None = None) -> list[GraphStructure]:
    return [compute_structure(g, steps, max_ring_size) for g in dataset.graphs]


def save_sidecar(path, structures: list[GraphStructure], steps: int,
                 max_ring_size: int | None) -> None:
    payload = {
        "format_version": SIDECAR_VERSION,
        "steps": steps,
        "max_ring_size": max_ring_size,
        "graph_count": len(structures),
        "graphs": [structure_to_record(s) for s in structures],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_sidecar(path, expected_graphs: int | None = None) -> list[GraphStructure]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != SIDECAR_VERSION:
        raise VersionError(
            f"sidecar format version {version} != supported {SIDECAR_VERSION}"
        )
    if expected_graphs is not None and payload["graph_count"] != expected_graphs:
        raise VersionError(
            f"sidecar holds {payload['graph_count']} graphs, dataset has "
            f"{expected_graphs}"
        )
    return [structure_from_record(r) for r in payload["graphs"]]

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chromagt import DatasetError, Graph, adjacency_matrix, degree_vector, load_dataset
from chromagt.graphs import assign_default_splits, permute_graph, save_dataset

from conftest import complete_graph, path_graph, random_graph


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n")


class TestLoadDataset:
    def test_basic_record(self, tmp_path):
        f = tmp_path / "d.jsonl"
        write_lines(f, [
            '{"num_nodes":3,"node_feats":[[0],[1],[0]],"edges":[[0,1,0],[1,2,0]],"y":1.5}'
        ])
        ds = load_dataset(f, task="regression")
        g = ds.graphs[0]
        assert g.num_nodes == 3
        assert g.node_feats == ((0,), (1,), (0,))
        assert g.edges == ((0, 1, 0), (1, 2, 0))
        assert g.target == 1.5

    def test_self_loop_rejected(self, tmp_path):
        f = tmp_path / "d.jsonl"
        write_lines(f, ['{"num_nodes":2,"node_feats":[[0],[0]],"edges":[[0,0,0]]}'])
        with pytest.raises(DatasetError, match="graph 0.*self-loop"):
            load_dataset(f)

    def test_malformed_json_names_line(self, tmp_path):
        f = tmp_path / "d.jsonl"
        write_lines(f, [
            '{"num_nodes":1,"node_feats":[[0]],"edges":[]}',
            "{not json",
        ])
        with pytest.raises(DatasetError, match="line 2"):
            load_dataset(f)

    def test_duplicate_edge_rejected(self, tmp_path):
        f = tmp_path / "d.jsonl"
        write_lines(f, [
            '{"num_nodes":2,"node_feats":[[0],[0]],"edges":[[0,1,0],[1,0,1]]}'
        ])
        with pytest.raises(DatasetError, match="duplicate"):
            load_dataset(f)

    def test_edge_order_normalized(self, tmp_path):
        f = tmp_path / "d.jsonl"
        write_lines(f, ['{"num_nodes":2,"node_feats":[[0],[0]],"edges":[[1,0,2]]}'])
        ds = load_dataset(f)
        assert ds.graphs[0].edges == ((0, 1, 2),)

    def test_default_split_with_tagged_test(self, tmp_path):
        # 100 lines, 10% explicitly tagged test: the default rule fills the
        # remaining quotas so the final sizes are exactly 80/10/10.
        lines = []
        for i in range(100):
            record = {
                "num_nodes": 2,
                "node_feats": [[0], [0]],
                "edges": [[0, 1, 0]],
                "y": float(i),
            }
            if i % 10 == 0:
                record["split"] = "test"
            lines.append(json.dumps(record))
        f = tmp_path / "d.jsonl"
        write_lines(f, lines)
        ds = load_dataset(f)
        assert ds.split_sizes() == {"train": 80, "val": 10, "test": 10}
        # tagged lines keep their tag
        assert all(ds.splits[i] == "test" for i in range(0, 100, 10))

    def test_untagged_split_is_80_10_10(self):
        splits = assign_default_splits(100)
        assert splits.count("train") == 80
        assert splits.count("val") == 10
        assert splits.count("test") == 10

    def test_idempotent(self, tmp_path):
        lines = [
            '{"num_nodes":3,"node_feats":[[0],[1],[0]],"edges":[[0,1,0],[1,2,1]],"y":1.0}',
            '{"num_nodes":2,"node_feats":[[2],[3]],"edges":[[0,1,2]],"y":-0.5}',
        ]
        f = tmp_path / "d.jsonl"
        write_lines(f, lines)
        assert load_dataset(f) == load_dataset(f)

    def test_roundtrip_via_save(self, tmp_path):
        g = random_graph(np.random.default_rng(0), 6)
        g = Graph(g.num_nodes, g.node_feats, g.edges, 2.25)
        from chromagt.graphs import Dataset

        ds = Dataset(graphs=(g,), splits=("train",))
        f = tmp_path / "round.jsonl"
        save_dataset(ds, f)
        assert load_dataset(f) == ds

    def test_node_labels_task(self, tmp_path):
        f = tmp_path / "d.jsonl"
        write_lines(f, [
            '{"num_nodes":3,"node_feats":[[0],[0],[0]],"edges":[[0,1,0]],"y":[0,1,0]}'
        ])
        ds = load_dataset(f, task="node_class")
        assert ds.graphs[0].target == (0, 1, 0)

    def test_label_count_mismatch(self, tmp_path):
        f = tmp_path / "d.jsonl"
        write_lines(f, [
            '{"num_nodes":3,"node_feats":[[0],[0],[0]],"edges":[[0,1,0]],"y":[0,1]}'
        ])
        with pytest.raises(DatasetError, match="labels"):
            load_dataset(f, task="node_class")


class TestMatrices:
    def test_adjacency_path(self):
        assert adjacency_matrix(path_graph(3)).tolist() == [
            [0, 1, 0], [1, 0, 1], [0, 1, 0]]

    def test_adjacency_complete(self):
        a = adjacency_matrix(complete_graph(3))
        assert a.tolist() == [[0, 1, 1], [1, 0, 1], [1, 1, 0]]

    def test_adjacency_empty(self):
        g = Graph(2, ((0,), (0,)), ())
        assert adjacency_matrix(g).tolist() == [[0, 0], [0, 0]]

    def test_degrees(self):
        assert degree_vector(path_graph(3)).tolist() == [1, 2, 1]
        assert degree_vector(complete_graph(3)).tolist() == [2, 2, 2]

    def test_isolated_node_degree_zero(self):
        g = Graph(3, ((0,),) * 3, ((0, 1, 0),))
        assert degree_vector(g).tolist() == [1, 1, 0]

    @settings(max_examples=30, deadline=None)
    @given(st.integers(min_value=2, max_value=9), st.integers(min_value=0, max_value=10**6))
    def test_adjacency_symmetric_zero_diagonal(self, n, seed):
        g = random_graph(np.random.default_rng(seed), n)
        a = adjacency_matrix(g)
        assert np.array_equal(a, a.T)
        assert np.all(np.diag(a) == 0)
        assert np.array_equal(degree_vector(g), a.sum(axis=1))


class TestPermute:
    def test_permute_preserves_structure(self, rng):
        g = random_graph(rng, 7)
        perm = list(rng.permutation(7))
        pg = permute_graph(g, perm)
        pg.validate()
        a = adjacency_matrix(g)
        pa = adjacency_matrix(pg)
        p = np.zeros((7, 7))
        for old, new in enumerate(perm):
            p[new, old] = 1.0
        assert np.allclose(pa, p @ a @ p.T)

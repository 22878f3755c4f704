import networkx as nx
import numpy as np
import pytest

from chromagt import (
    Graph,
    all_pairs_shortest_path,
    compute_structure,
    node_return_probabilities,
    random_walk_matrix,
    random_walk_powers,
)
from chromagt.sidecar import (
    build_sidecar,
    load_sidecar,
    save_sidecar,
    structure_from_record,
    structure_to_record,
)
from chromagt.structure import SPD_SELF, spd_unreachable

from conftest import complete_graph, cycle_graph, path_graph, random_graph


def to_nx(g: Graph) -> nx.Graph:
    gx = nx.Graph()
    gx.add_nodes_from(range(g.num_nodes))
    gx.add_edges_from((u, v) for u, v, _ in g.edges)
    return gx


class TestRandomWalk:
    def test_path_matrix(self):
        rw = random_walk_matrix(path_graph(3))
        assert rw.tolist() == [[0, 1, 0], [0.5, 0, 0.5], [0, 1, 0]]

    def test_complete_matrix(self):
        rw = random_walk_matrix(complete_graph(3))
        expected = 0.5 * (np.ones((3, 3)) - np.eye(3))
        assert np.allclose(rw, expected)

    def test_isolated_row_zero(self):
        g = Graph(3, ((0,),) * 3, ((0, 1, 0),))
        rw = random_walk_matrix(g)
        assert rw[2].tolist() == [0.0, 0.0, 0.0]

    def test_first_power_is_matrix(self):
        rw = random_walk_matrix(path_graph(4))
        powers = random_walk_powers(rw, 3)
        assert np.array_equal(powers[0], rw)

    def test_path_second_power(self):
        powers = random_walk_powers(random_walk_matrix(path_graph(3)), 2)
        assert powers[0][0][2] == 0.0
        assert powers[1][0][2] == 0.5

    def test_triangle_third_power(self):
        powers = random_walk_powers(random_walk_matrix(complete_graph(3)), 3)
        expected = (3.0 * np.ones((3, 3)) - np.eye(3)) / 8.0
        assert np.allclose(powers[2], expected)
        assert np.allclose(np.diag(powers[2]), 0.25)

    def test_row_sums_stochastic(self, rng):
        for _ in range(20):
            g = random_graph(rng, int(rng.integers(3, 10)), connected=True)
            powers = random_walk_powers(random_walk_matrix(g), 6)
            sums = powers.sum(axis=2)
            assert np.allclose(sums, 1.0, atol=1e-9)
            assert powers.min() >= 0.0 and powers.max() <= 1.0 + 1e-12

    def test_first_nonzero_power_is_bfs_distance(self, rng):
        # 100 random connected graphs: min{k : rw^k_ij > 0} equals the BFS
        # distance whenever that distance is within the step count.
        p = 6
        for _ in range(100):
            g = random_graph(rng, int(rng.integers(3, 13)), connected=True)
            powers = random_walk_powers(random_walk_matrix(g), p)
            dist = dict(nx.all_pairs_shortest_path_length(to_nx(g)))
            for i in range(g.num_nodes):
                for j in range(g.num_nodes):
                    if i == j or dist[i][j] > p:
                        continue
                    first = next(k + 1 for k in range(p) if powers[k, i, j] > 0.0)
                    assert first == dist[i][j]

    def test_triangle_membership_via_third_power(self, rng):
        for _ in range(100):
            g = random_graph(rng, int(rng.integers(3, 13)), connected=True)
            powers = random_walk_powers(random_walk_matrix(g), 3)
            adj = {(u, v) for u, v, _ in g.edges} | {(v, u) for u, v, _ in g.edges}
            n = g.num_nodes
            in_triangle = [
                any(
                    (i, a) in adj and (a, b) in adj and (b, i) in adj
                    for a in range(n)
                    for b in range(n)
                    if a != b and a != i and b != i
                )
                for i in range(n)
            ]
            for i in range(n):
                assert (powers[2, i, i] > 0.0) == in_triangle[i]

    def test_node_return_probabilities(self):
        k3 = random_walk_powers(random_walk_matrix(complete_graph(3)), 3)
        assert np.allclose(node_return_probabilities(k3)[0], [0.0, 0.5, 0.25])
        p3 = random_walk_powers(random_walk_matrix(path_graph(3)), 2)
        pe = node_return_probabilities(p3)
        assert np.allclose(pe[1], [0.0, 1.0])
        # no self-loops: one-step return probability is always zero
        assert np.all(pe[:, 0] == 0.0)


class TestShortestPaths:
    def test_path_distance(self):
        spd = all_pairs_shortest_path(path_graph(3), cap=4)
        assert spd[0][2] == 2
        assert spd[0][0] == SPD_SELF

    def test_disconnected_unreachable(self):
        g = Graph(2, ((0,), (0,)), ())
        spd = all_pairs_shortest_path(g, cap=4)
        assert spd[0][1] == spd_unreachable(4)

    def test_cycle_capped(self):
        spd = all_pairs_shortest_path(cycle_graph(6), cap=2)
        assert spd[0][3] == spd_unreachable(2)  # true distance 3
        assert spd[0][2] == 2

    def test_symmetric_and_matches_bfs(self, rng):
        for _ in range(25):
            g = random_graph(rng, int(rng.integers(2, 11)))
            cap = 5
            spd = all_pairs_shortest_path(g, cap=cap)
            assert np.array_equal(spd, spd.T)
            dist = dict(nx.all_pairs_shortest_path_length(to_nx(g)))
            far = spd_unreachable(cap)
            for i in range(g.num_nodes):
                for j in range(g.num_nodes):
                    true = dist[i].get(j)
                    if i == j:
                        assert spd[i][j] == SPD_SELF
                    elif true is None or true > cap:
                        assert spd[i][j] == far
                    else:
                        assert spd[i][j] == true


class TestSidecar:
    def test_roundtrip_bit_exact(self, tmp_path, rng):
        from chromagt.graphs import Dataset

        graphs = tuple(random_graph(rng, int(rng.integers(3, 9))) for _ in range(5))
        ds = Dataset(graphs=graphs, splits=("train",) * 5)
        structures = build_sidecar(ds, steps=5, max_ring_size=6)
        path = tmp_path / "side.json"
        save_sidecar(path, structures, steps=5, max_ring_size=6)
        loaded = load_sidecar(path, expected_graphs=5)
        for a, b in zip(structures, loaded):
            assert np.array_equal(a.rw_powers, b.rw_powers)  # bit-exact
            assert np.array_equal(a.spd, b.spd)
            assert a.rings == b.rings
            assert a.spd_cap == b.spd_cap

    def test_rerun_identical_bytes(self, tmp_path, rng):
        from chromagt.graphs import Dataset

        graphs = tuple(random_graph(rng, 6) for _ in range(3))
        ds = Dataset(graphs=graphs, splits=("train",) * 3)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_sidecar(p1, build_sidecar(ds, 4, None), steps=4, max_ring_size=None)
        save_sidecar(p2, build_sidecar(ds, 4, None), steps=4, max_ring_size=None)
        assert p1.read_bytes() == p2.read_bytes()

    def test_version_mismatch_refused(self, tmp_path):
        import json

        from chromagt import VersionError

        path = tmp_path / "side.json"
        path.write_text(json.dumps({"format_version": 999, "graph_count": 0, "graphs": []}))
        with pytest.raises(VersionError):
            load_sidecar(path)

    def test_record_roundtrip(self, rng):
        g = random_graph(rng, 7)
        s = compute_structure(g, steps=4, max_ring_size=6)
        s2 = structure_from_record(structure_to_record(s))
        assert np.array_equal(s.rw_powers, s2.rw_powers)
        assert s.rings == s2.rings


class TestDistinguishability:
    def test_equal_distance_pairs_with_different_walk_features(self):
        # Over all connected graphlets with up to 5 nodes there are pairs at
        # the same shortest-path distance whose 3-step walk vectors differ
        # by more than 0.1 in some coordinate, so the walk encoding separates
        # pairs the distance embedding cannot.
        from itertools import combinations

        found = False
        items = []
        for n in range(2, 6):
            pairs = list(combinations(range(n), 2))
            for mask in range(1 << len(pairs)):
                edges = tuple(
                    (u, v, 0) for b, (u, v) in enumerate(pairs) if mask >> b & 1
                )
                g = Graph(n, tuple((0,) for _ in range(n)), edges)
                gx = to_nx(g)
                if not nx.is_connected(gx):
                    continue
                powers = random_walk_powers(random_walk_matrix(g), 3)
                spd = all_pairs_shortest_path(g, cap=3)
                for i in range(n):
                    for j in range(i + 1, n):
                        if 1 <= spd[i][j] <= 3:
                            items.append((int(spd[i][j]), powers[:, i, j].copy()))
        for (d1, v1), (d2, v2) in combinations(items[:4000], 2):
            if d1 == d2 and np.max(np.abs(v1 - v2)) > 0.1:
                found = True
                break
        assert found

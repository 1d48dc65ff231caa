"""Graph container, dataset I/O, normalization, SBM generation, and edits."""

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from gpcn.graph import (DatasetError, EdgeEdit, SyntheticSpec, apply_edits,
                        generate_synthetic, graphs_equal,
                        largest_connected_component, load_dataset, make_graph,
                        normalize_adjacency, propagate, save_dataset)

from conftest import random_graph


def dense_normalized(g):
    """Brute-force D^{-1/2}(A+I)D^{-1/2} oracle on a dense adjacency."""
    a = g.csr.toarray() + np.eye(g.num_nodes)
    d = a.sum(axis=1)
    return a / np.sqrt(np.outer(d, d))


def write_dataset(tmp_path, num_nodes, edges, features, labels, splits,
                  num_features=None, num_classes=None):
    import json
    if num_features is None:
        num_features = len(features[0])
    if num_classes is None:
        num_classes = max(labels) + 1
    (tmp_path / "meta.json").write_text(json.dumps(
        {"name": "t", "num_nodes": num_nodes, "num_features": num_features,
         "num_classes": num_classes}))
    (tmp_path / "edges.csv").write_text(
        "".join(f"{u},{v}\n" for u, v in edges))
    (tmp_path / "features.csv").write_text(
        "".join(",".join(str(x) for x in row) + "\n" for row in features))
    (tmp_path / "labels.csv").write_text("".join(f"{y}\n" for y in labels))
    (tmp_path / "splits.csv").write_text("".join(f"{s}\n" for s in splits))


class TestMakeGraph:
    def test_smallest_nonempty_graph(self):
        g = make_graph(2, [[1.0], [0.0]], [0, 1], ["train", "test"], [[0, 1]])
        assert list(g.neighbors(0)) == [1]
        assert list(g.neighbors(1)) == [0]

    def test_symmetrization_dedupes_reversed_pair(self):
        g = make_graph(2, [[0.0], [0.0]], [0, 0], ["none", "none"],
                       [[0, 1], [1, 0]], num_classes=1)
        assert g.num_edges == 1

    def test_self_loops_dropped_with_warning(self):
        with pytest.warns(UserWarning, match="self-loop"):
            g = make_graph(2, [[0.0], [0.0]], [0, 0], ["none", "none"],
                           [[0, 0], [0, 1]], num_classes=1)
        assert g.num_edges == 1

    def test_label_out_of_range(self):
        with pytest.raises(DatasetError):
            make_graph(1, [[0.0]], [3], ["none"], [], num_classes=2)

    def test_unknown_split_tag(self):
        with pytest.raises(DatasetError):
            make_graph(1, [[0.0]], [0], ["wat"], [], num_classes=1)

    def test_csr_is_symmetric(self, rng):
        g = random_graph(rng, 9)
        assert (g.csr != g.csr.T).nnz == 0


class TestDatasetIO:
    def test_two_node_file(self, tmp_path):
        write_dataset(tmp_path, 2, [(0, 1)], [[1.0], [0.0]], [0, 1],
                      ["train", "test"])
        g = load_dataset(tmp_path)
        assert list(g.neighbors(0)) == [1]
        assert list(g.neighbors(1)) == [0]

    def test_both_directions_collapse(self, tmp_path):
        write_dataset(tmp_path, 2, [(0, 1), (1, 0)], [[1.0], [0.0]], [0, 1],
                      ["train", "test"])
        assert load_dataset(tmp_path).num_edges == 1

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetError, match="missing"):
            load_dataset(tmp_path)

    def test_row_count_mismatch_names_file(self, tmp_path):
        write_dataset(tmp_path, 3, [(0, 1)], [[1.0], [0.0]], [0, 1],
                      ["train", "test"])
        with pytest.raises(DatasetError, match="features.csv"):
            load_dataset(tmp_path)

    def test_malformed_line_reports_line_number(self, tmp_path):
        write_dataset(tmp_path, 2, [(0, 1)], [[1.0], [0.0]], [0, 1],
                      ["train", "test"])
        (tmp_path / "labels.csv").write_text("0\nnope\n")
        with pytest.raises(DatasetError, match="labels.csv:2"):
            load_dataset(tmp_path)

    def test_save_load_fixed_point(self, tmp_path, rng):
        g = random_graph(rng, 12, num_features=4, num_classes=3)
        save_dataset(g, tmp_path / "a")
        g2 = load_dataset(tmp_path / "a")
        assert graphs_equal(g, g2)
        save_dataset(g2, tmp_path / "b")
        g3 = load_dataset(tmp_path / "b")
        assert graphs_equal(g2, g3)


class TestNormalization:
    def test_single_edge_pair(self, path_graph):
        dense = normalize_adjacency(path_graph).dense()
        assert np.allclose(dense, [[0.5, 0.5], [0.5, 0.5]], atol=1e-15)

    def test_triangle_is_all_thirds(self):
        g = make_graph(3, np.zeros((3, 1)), [0, 0, 0], ["none"] * 3,
                       [[0, 1], [1, 2], [0, 2]], num_classes=1)
        assert np.allclose(normalize_adjacency(g).dense(), 1.0 / 3.0,
                           atol=1e-15)

    def test_isolated_node_diagonal_one(self):
        g = make_graph(3, np.zeros((3, 1)), [0, 0, 0], ["none"] * 3,
                       [[0, 1]], num_classes=1)
        dense = normalize_adjacency(g).dense()
        assert dense[2, 2] == 1.0
        assert np.count_nonzero(dense[2]) == 1

    @settings(deadline=None, max_examples=25)
    @given(seed=st.integers(0, 10_000), n=st.integers(1, 20))
    def test_matches_dense_oracle(self, seed, n):
        g = random_graph(np.random.default_rng(seed), n)
        dense = normalize_adjacency(g).dense()
        assert np.abs(dense - dense_normalized(g)).max() <= 1e-12

    @settings(deadline=None, max_examples=25)
    @given(seed=st.integers(0, 10_000), n=st.integers(1, 20))
    def test_symmetry_and_value_range(self, seed, n):
        g = random_graph(np.random.default_rng(seed), n)
        mat = normalize_adjacency(g).matrix
        assert (mat != mat.T).nnz == 0
        values = mat.toarray()
        nz = values[values != 0]
        assert np.all(nz > 0) and np.all(nz <= 1.0)
        degrees = np.asarray(g.csr.sum(axis=1)).ravel() + 1
        row_sums = values.sum(axis=1)
        assert np.all(row_sums > 0)
        assert np.all(row_sums <= 1 + degrees.max())


class TestPropagate:
    def test_isolated_nodes_identity(self):
        g = make_graph(4, np.zeros((4, 1)), [0] * 4, ["none"] * 4, [],
                       num_classes=1)
        m = np.arange(8.0).reshape(4, 2)
        assert np.array_equal(propagate(normalize_adjacency(g), m), m)

    def test_two_node_path(self, path_graph):
        out = propagate(normalize_adjacency(path_graph), [[1.0], [0.0]])
        assert np.allclose(out, [[0.5], [0.5]], atol=1e-15)

    def test_linearity(self, rng):
        g = random_graph(rng, 5)
        adj = normalize_adjacency(g)
        a = rng.normal(size=(5, 3))
        b = rng.normal(size=(5, 3))
        assert np.allclose(propagate(adj, a + b),
                           propagate(adj, a) + propagate(adj, b), atol=1e-12)

    def test_row_count_mismatch(self, path_graph):
        with pytest.raises(ValueError, match="rows"):
            propagate(normalize_adjacency(path_graph), np.zeros((3, 1)))


class TestGenerateSynthetic:
    def test_degenerate_probabilities_give_disjoint_cliques(self):
        spec = SyntheticSpec(3, 4, 1.0, 0.0, 2, 0.0)
        g = generate_synthetic(spec, 0)
        n_comp, comp = sp.csgraph.connected_components(g.csr, directed=False)
        assert n_comp == 3
        # each block is complete: 4 choose 2 edges apiece
        assert g.num_edges == 3 * 6

    def test_determinism(self):
        spec = SyntheticSpec(2, 10, 0.3, 0.05, 4, 0.5)
        assert graphs_equal(generate_synthetic(spec, 9),
                            generate_synthetic(spec, 9))

    def test_labels_are_blocks_and_splits_cover(self):
        spec = SyntheticSpec(3, 10, 0.2, 0.02, 5, 0.3, (0.5, 0.25, 0.25))
        g = generate_synthetic(spec, 1)
        assert g.num_classes == 3
        assert np.array_equal(np.sort(np.unique(g.labels)), [0, 1, 2])
        assert g.mask("train").sum() == 15
        assert g.mask("val").sum() == 8  # round(0.25 * 30)
        assert g.mask("train").sum() + g.mask("val").sum() \
            + g.mask("test").sum() + g.mask("none").sum() == 30


class TestLargestConnectedComponent:
    def test_connected_graph_unchanged(self, rng):
        g = random_graph(rng, 6, edge_prob=0.9)
        assert graphs_equal(largest_connected_component(g), g)

    def test_picks_bigger_component(self):
        g = make_graph(5, np.arange(5.0).reshape(5, 1), [0, 1, 0, 1, 0],
                       ["train", "val", "test", "none", "none"],
                       [[0, 1], [1, 2], [3, 4]], num_classes=2)
        lcc = largest_connected_component(g)
        assert lcc.num_nodes == 3
        assert np.array_equal(lcc.features.ravel(), [0.0, 1.0, 2.0])
        assert list(lcc.split) == ["train", "val", "test"]

    def test_size_tie_keeps_lowest_id_component(self):
        g = make_graph(4, np.zeros((4, 1)), [0] * 4, ["none"] * 4,
                       [[0, 1], [2, 3]], num_classes=1)
        lcc = largest_connected_component(g)
        assert lcc.num_nodes == 2
        assert np.array_equal(lcc.edges, [[0, 1]])


class TestApplyEdits:
    def test_empty_edit_list_identity(self, rng):
        g = random_graph(rng, 5)
        assert graphs_equal(apply_edits(g, []), g)

    def test_path_to_triangle(self):
        g = make_graph(3, np.zeros((3, 1)), [0] * 3, ["none"] * 3,
                       [[0, 1], [1, 2]], num_classes=1)
        out = apply_edits(g, [EdgeEdit("add", 0, 2)])
        assert out.num_edges == 3
        assert g.num_edges == 2   # original untouched

    def test_add_then_remove_is_identity(self, rng):
        g = random_graph(rng, 5, edge_prob=0.2)
        edits = [EdgeEdit("add", 0, 4), EdgeEdit("remove", 0, 4)]
        assert graphs_equal(apply_edits(g, edits), g)

    def test_illegal_add_and_remove(self, path_graph):
        with pytest.raises(ValueError, match="already present"):
            apply_edits(path_graph, [EdgeEdit("add", 0, 1)])
        g = make_graph(3, np.zeros((3, 1)), [0] * 3, ["none"] * 3,
                       [[0, 1]], num_classes=1)
        with pytest.raises(ValueError, match="not present"):
            apply_edits(g, [EdgeEdit("remove", 1, 2)])
        with pytest.raises(IndexError, match="range"):
            apply_edits(g, [EdgeEdit("add", 0, 5)])

    def test_feature_flip_round_trip(self):
        g = make_graph(2, [[1.0, 0.0], [0.0, 1.0]], [0, 1],
                       ["none", "none"], [[0, 1]], num_classes=2)
        e = EdgeEdit("feature_flip", 0, 1)
        once = apply_edits(g, [e])
        assert once.features[0, 1] == 1.0
        assert graphs_equal(apply_edits(once, [e.inverse()]), g)

    @settings(deadline=None, max_examples=25)
    @given(seed=st.integers(0, 10_000))
    def test_inverse_edit_list_restores_graph(self, seed):
        rng = np.random.default_rng(seed)
        g = random_graph(rng, 7, edge_prob=0.4)
        edits = []
        current = g
        for _ in range(4):
            u, v = sorted(rng.choice(7, size=2, replace=False))
            kind = "remove" if current.has_edge(u, v) else "add"
            edits.append(EdgeEdit(kind, int(u), int(v)))
            current = apply_edits(current, [edits[-1]])
        restored = apply_edits(current, [e.inverse() for e in reversed(edits)])
        assert graphs_equal(restored, g)

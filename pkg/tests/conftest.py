"""Shared fixtures and independent oracles for the test suite."""

import os

import numpy as np
import pytest

from pugraph.graph import Graph, build_graph


def random_graph(rng: np.random.Generator, n: int, p: float) -> Graph:
    """Erdos-Renyi graph for property tests."""
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    return build_graph(np.column_stack([iu[keep], ju[keep]]), n)


def floyd_warshall(g: Graph) -> np.ndarray:
    """All-pairs shortest hop counts, brute force; the BFS oracle."""
    n = g.num_nodes
    dist = np.full((n, n), np.inf)
    np.fill_diagonal(dist, 0.0)
    for i in range(n):
        dist[i, g.neighbors(i)] = 1.0
    for k in range(n):
        dist = np.minimum(dist, dist[:, k:k + 1] + dist[k:k + 1, :])
    return dist


def numeric_grad_params(objective, params, eps: float = 1e-5) -> dict:
    """Central finite differences of a scalar objective over every parameter."""
    grads = {}
    for name, arr in params.values.items():
        flat = arr.reshape(-1)
        g = np.zeros(flat.size)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            f_plus = objective()
            flat[i] = orig - eps
            f_minus = objective()
            flat[i] = orig
            g[i] = (f_plus - f_minus) / (2.0 * eps)
        grads[name] = g.reshape(arr.shape)
    return grads


def numeric_grad_array(objective, arr: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar objective over one array."""
    flat = arr.reshape(-1)
    g = np.zeros(flat.size)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        f_plus = objective()
        flat[i] = orig - eps
        f_minus = objective()
        flat[i] = orig
        g[i] = (f_plus - f_minus) / (2.0 * eps)
    return g.reshape(arr.shape)


def assert_grad_close(analytic: np.ndarray, numeric: np.ndarray,
                      rel: float = 1e-4, abs_floor: float = 1e-8, label: str = ""):
    analytic = np.asarray(analytic, dtype=float)
    numeric = np.asarray(numeric, dtype=float)
    tol = np.maximum(abs_floor, rel * np.maximum(np.abs(analytic), np.abs(numeric)))
    bad = np.abs(analytic - numeric) > tol
    assert not bad.any(), (
        f"{label}: {bad.sum()} of {bad.size} gradient entries off; worst "
        f"analytic={analytic[bad].ravel()[0]} numeric={numeric[bad].ravel()[0]}"
    )


class ReplaySampler:
    """Returns pre-drawn negatives; freezes the regularizer for FD checks."""

    def __init__(self, graph: Graph, negatives: np.ndarray):
        self.non_neighbor_counts = graph.num_nodes - 1 - graph.degrees
        self._negatives = negatives

    def edge_negatives(self, src, dst, k):
        assert self._negatives.shape == (src.size, k)
        return self._negatives


class EdgeKeyedSampler:
    """Replays negatives keyed by the (src, dst) edge, for relabeling tests."""

    def __init__(self, graph: Graph, by_edge: dict):
        self.non_neighbor_counts = graph.num_nodes - 1 - graph.degrees
        self._by_edge = by_edge

    def edge_negatives(self, src, dst, k):
        return np.stack([self._by_edge[(int(i), int(j))] for i, j in zip(src, dst)])


def find_dataset_dir(name: str):
    """Locate raw dataset files under $PUGRAPH_DATA or ./data; None if absent."""
    candidates = []
    env = os.environ.get("PUGRAPH_DATA")
    if env:
        candidates.append(os.path.join(env, name))
    candidates.append(os.path.join(os.path.dirname(__file__), "..", "data", name))
    candidates.append(os.path.join("data", name))
    for base in candidates:
        if os.path.isdir(base):
            return os.path.abspath(base)
    return None


def cora_manifest():
    """Dataset manifest for the raw Cora files, or None when not on disk."""
    base = find_dataset_dir("cora")
    if base is None:
        return None
    content = os.path.join(base, "cora.content")
    cites = os.path.join(base, "cora.cites")
    if not (os.path.exists(content) and os.path.exists(cites)):
        return None
    return {
        "name": "cora",
        "format": "content_cites",
        "content": content,
        "cites": cites,
        "positive_classes": ["Neural_Networks", "Probabilistic_Methods"],
        "normalize_features": True,
        "train_count": 271,
        "split_seed": 0,
    }


@pytest.fixture(scope="session")
def cora():
    manifest = cora_manifest()
    if manifest is None:
        pytest.skip("Cora raw files not found (set PUGRAPH_DATA or place them "
                    "under ./data/cora/); this check needs the real dataset")
    return manifest


SBM_MANIFEST = {
    "name": "sbm400",
    "format": "sbm",
    "n_pos": 200,
    "n_neg": 200,
    "p_intra": 0.05,
    "p_inter": 0.005,
    "graph_seed": 7,
    "feature_dim": 8,
    "positive_classes": ["pos"],
    "normalize_features": True,
    "train_fraction": 0.1,
    "split_seed": 0,
}

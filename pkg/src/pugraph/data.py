"""Dataset ingestion: citation-network files, JSON-lines interchange, PU masks.

Two on-disk formats are supported:

- `.content` / `.cites` plain text (whitespace separated). Content rows are
  `node_id feat_1 ... feat_d class_name`; cites rows are `citing cited`.
  Cites rows referencing unknown ids are skipped and counted in a warning.
- JSON lines, one object per node:
  `{"id": str, "features": [num], "label": str, "neighbors": [str]}`.

Both loaders produce the same triple (Graph, features, class labels) with
node order equal to file order and the adjacency symmetrized.
"""

import json
import logging
from dataclasses import dataclass

import numpy as np

from .errors import InputError, ParseError
from .graph import (DistancePartition, Graph, build_graph, generate_sbm,
                    partition_unlabeled)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BinaryMapping:
    """Which original class ids count as positive."""

    positive_classes: frozenset
    source_class_count: int

    def __post_init__(self):
        if not self.positive_classes:
            raise InputError("positive_classes must be nonempty")
        if len(self.positive_classes) >= self.source_class_count:
            raise InputError("positive_classes must be a strict subset of all classes")


@dataclass
class PUDataset:
    """Everything one training run consumes; immutable by convention."""

    graph: Graph
    features: np.ndarray        # num_nodes x feature_dim, float64
    true_label: np.ndarray      # per-node {0, 1}
    labeled_mask: np.ndarray    # bool; the known positives, subset of train_mask
    train_mask: np.ndarray      # bool
    test_mask: np.ndarray       # bool, complement of train_mask
    partition: DistancePartition

    @property
    def num_nodes(self) -> int:
        return self.graph.num_nodes

    @property
    def positive_prior(self) -> float:
        """Fraction of true positives over all nodes (transductive prior)."""
        return float(np.mean(self.true_label))


def load_content_cites(content_path, cites_path):
    """Parse the citation format; returns (Graph, features, class labels)."""
    ids: list[str] = []
    rows: list[list[float]] = []
    labels: list[str] = []
    width = None
    with open(content_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) < 3:
                raise ParseError("content row needs id, >=1 feature, class",
                                 str(content_path), lineno)
            if width is None:
                width = len(fields)
            elif len(fields) != width:
                raise ParseError(
                    f"expected {width} columns, found {len(fields)}",
                    str(content_path), lineno)
            try:
                feats = [float(x) for x in fields[1:-1]]
            except ValueError as exc:
                raise ParseError(f"non-numeric feature value: {exc}",
                                 str(content_path), lineno) from None
            ids.append(fields[0])
            rows.append(feats)
            labels.append(fields[-1])
    if not ids:
        raise InputError(f"{content_path}: content file has no rows")
    index = {node_id: i for i, node_id in enumerate(ids)}
    if len(index) != len(ids):
        raise InputError(f"{content_path}: duplicate node ids in content file")
    edges = []
    skipped = 0
    with open(cites_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            fields = line.split()
            if not fields:
                continue
            if len(fields) != 2:
                raise ParseError("cites row needs exactly two ids",
                                 str(cites_path), lineno)
            a, b = fields
            if a not in index or b not in index:
                skipped += 1
                continue
            edges.append((index[a], index[b]))
    if skipped:
        log.warning("%s: skipped %d cites rows referencing unknown node ids",
                    cites_path, skipped)
    graph = build_graph(edges, len(ids))
    return graph, np.asarray(rows, dtype=np.float64), labels


def load_jsonl(path):
    """Parse the JSON-lines interchange format; same contract as load_content_cites."""
    ids: list[str] = []
    rows: list[list[float]] = []
    labels: list[str] = []
    neighbor_lists: list[list[str]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", str(path), lineno) from None
            for key in ("id", "features", "label", "neighbors"):
                if key not in obj:
                    raise ParseError(f"missing key {key!r}", str(path), lineno)
            ids.append(str(obj["id"]))
            rows.append([float(x) for x in obj["features"]])
            labels.append(str(obj["label"]))
            neighbor_lists.append([str(x) for x in obj["neighbors"]])
    if not ids:
        raise InputError(f"{path}: no records")
    index = {}
    for i, node_id in enumerate(ids):
        if node_id in index:
            raise InputError(f"{path}: duplicate node id {node_id!r}")
        index[node_id] = i
    edges = []
    for i, nbrs in enumerate(neighbor_lists):
        for nbr in nbrs:
            if nbr not in index:
                raise InputError(f"{path}: node {ids[i]!r} lists unknown neighbor {nbr!r}")
            edges.append((i, index[nbr]))
    graph = build_graph(edges, len(ids))
    return graph, np.asarray(rows, dtype=np.float64), labels


def save_jsonl(path, graph: Graph, features: np.ndarray, labels):
    """Write the JSON-lines format; inverse of load_jsonl for valid inputs."""
    with open(path, "w", encoding="utf-8") as fh:
        for i in range(graph.num_nodes):
            obj = {
                "id": str(i),
                "features": [float(x) for x in features[i]],
                "label": str(labels[i]),
                "neighbors": [str(j) for j in graph.neighbors(i)],
            }
            fh.write(json.dumps(obj, separators=(",", ":")) + "\n")


def class_vocabulary(labels) -> dict[str, int]:
    """Stable class-name -> integer-id mapping (sorted by name)."""
    return {name: i for i, name in enumerate(sorted(set(labels)))}


def binarize_labels(labels: np.ndarray, mapping: BinaryMapping) -> np.ndarray:
    """Map integer class ids to {0, 1} per the mapping's positive set."""
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= mapping.source_class_count):
        bad = labels[(labels < 0) | (labels >= mapping.source_class_count)][0]
        raise InputError(f"class id {bad} outside [0, {mapping.source_class_count})")
    positive = np.zeros(mapping.source_class_count, dtype=np.int64)
    positive[list(mapping.positive_classes)] = 1
    return positive[labels]


def normalize_features(features: np.ndarray) -> np.ndarray:
    """Scale each row to unit L1 norm; zero rows stay zero."""
    features = np.asarray(features, dtype=np.float64)
    if not np.isfinite(features).all():
        raise InputError("features contain NaN or Inf")
    norms = np.abs(features).sum(axis=1, keepdims=True)
    safe = np.where(norms > 0.0, norms, 1.0)
    return features / safe


def make_train_test_split(num_nodes: int, train_count: int,
                          seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded uniform train subset of the given size; test is its complement."""
    if not 0 < train_count < num_nodes:
        raise InputError(f"train_count must lie in (0, {num_nodes}), got {train_count}")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(num_nodes, size=train_count, replace=False)
    train = np.zeros(num_nodes, dtype=bool)
    train[chosen] = True
    return train, ~train


def make_pu_split(binary_labels: np.ndarray, train_mask: np.ndarray,
                  label_ratio: float, seed: int) -> np.ndarray:
    """Keep labels on n_L = max(1, round(ratio * num_nodes)) training positives.

    n_L is capped at the number of positive training nodes; selection is
    uniform at random, deterministic given the seed.
    """
    if not 0.0 < label_ratio <= 1.0:
        raise InputError(f"label_ratio must lie in (0, 1], got {label_ratio}")
    binary_labels = np.asarray(binary_labels)
    candidates = np.flatnonzero(train_mask & (binary_labels == 1))
    if candidates.size == 0:
        raise InputError("no positive nodes in the training set")
    n_l = max(1, int(np.floor(label_ratio * binary_labels.size + 0.5)))
    n_l = min(n_l, candidates.size)
    rng = np.random.default_rng(seed)
    chosen = rng.choice(candidates, size=n_l, replace=False)
    mask = np.zeros(binary_labels.size, dtype=bool)
    mask[chosen] = True
    return mask


def make_sbm_dataset(n_pos: int, n_neg: int, p_intra: float, p_inter: float,
                     seed: int, feature_dim: int = 8, signal: float = 0.65,
                     background: float = 0.2):
    """Two-block SBM plus planted binary features; returns (graph, X, labels).

    Each node draws `feature_dim` Bernoulli bits: the first half fires at
    rate `signal` for its own block and `background` for the other block
    (mirrored for the second half), so features are informative but noisy.
    """
    graph, binary = generate_sbm(n_pos, n_neg, p_intra, p_inter, seed)
    rng = np.random.default_rng([seed, 1])
    half = feature_dim // 2
    rates = np.full((graph.num_nodes, feature_dim), background)
    rates[binary == 1, :half] = signal
    rates[binary == 0, half:] = signal
    features = (rng.random((graph.num_nodes, feature_dim)) < rates).astype(np.float64)
    labels = ["pos" if b else "neg" for b in binary]
    return graph, features, labels


def resolve_train_count(num_nodes: int, manifest: dict) -> int:
    if "train_count" in manifest:
        return int(manifest["train_count"])
    frac = float(manifest.get("train_fraction", 0.1))
    return max(1, int(np.floor(frac * num_nodes + 0.5)))


def load_source(manifest: dict):
    """Dispatch on manifest['format'] and return (graph, features, labels)."""
    fmt = manifest.get("format", "content_cites")
    if fmt == "content_cites":
        return load_content_cites(manifest["content"], manifest["cites"])
    if fmt == "jsonl":
        return load_jsonl(manifest["path"])
    if fmt == "sbm":
        return make_sbm_dataset(
            n_pos=int(manifest.get("n_pos", 200)),
            n_neg=int(manifest.get("n_neg", 200)),
            p_intra=float(manifest.get("p_intra", 0.05)),
            p_inter=float(manifest.get("p_inter", 0.005)),
            seed=int(manifest.get("graph_seed", 0)),
            feature_dim=int(manifest.get("feature_dim", 8)),
        )
    raise InputError(f"unknown dataset format {fmt!r}")


def build_dataset(manifest: dict, label_ratio: float, seed: int,
                  delta: int) -> PUDataset:
    """Assemble a ready-to-train PUDataset from a dataset manifest.

    The PU mask is drawn with `seed`; the train/test split uses the
    manifest's own `split_seed` so repeats share the split but resample the
    mask. The distance partition is built with the given delta.
    """
    graph, features, labels = load_source(manifest)
    vocab = class_vocabulary(labels)
    positive_names = manifest.get("positive_classes")
    if not positive_names:
        raise InputError("dataset manifest must list positive_classes")
    unknown = [c for c in positive_names if str(c) not in vocab]
    if unknown:
        raise InputError(f"positive_classes {unknown} not present in the data "
                         f"(classes: {sorted(vocab)})")
    mapping = BinaryMapping(frozenset(vocab[str(c)] for c in positive_names), len(vocab))
    int_labels = np.array([vocab[name] for name in labels], dtype=np.int64)
    binary = binarize_labels(int_labels, mapping)
    if manifest.get("normalize_features", True):
        features = normalize_features(features)
    train_mask, test_mask = make_train_test_split(
        graph.num_nodes, resolve_train_count(graph.num_nodes, manifest),
        int(manifest.get("split_seed", 0)))
    labeled_mask = make_pu_split(binary, train_mask, label_ratio, seed)
    partition = partition_unlabeled(graph, np.flatnonzero(labeled_mask), delta)
    return PUDataset(
        graph=graph,
        features=features,
        true_label=binary,
        labeled_mask=labeled_mask,
        train_mask=train_mask,
        test_mask=test_mask,
        partition=partition,
    )

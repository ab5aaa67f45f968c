"""Deterministic full-graph training: Adam, negative sampling, epoch loop.

A run is a pure function of (dataset, TrainConfig): parameter init, the
negative sampler and the PU mask are all seeded, matrix products are plain
numpy, and the per-epoch log is reproducible byte-for-byte apart from the
wall-time fields.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError, NumericError, TrainingAbort
from .graph import Graph, normalize_adjacency
from .losses import LossConfig, combined_objective
from .nn import (WEIGHT_NAMES, ParamStore, forward_from_propagated,
                 gcn_backward, init_params)


@dataclass
class TrainConfig:
    epochs: int = 400
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    seed: int = 0
    log_every: int = 1
    loss: LossConfig = field(default_factory=LossConfig)

    def validate(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.learning_rate <= 0.0:
            raise ConfigError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.weight_decay < 0.0:
            raise ConfigError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.log_every < 1:
            raise ConfigError(f"log_every must be >= 1, got {self.log_every}")
        self.loss.validate()


class NegativeSampler:
    """Uniform draws over the non-neighbors of a query node, with replacement.

    Draws are produced by rejection from uniform-over-all-nodes (reject self
    and neighbors); the sequence is fully determined by (seed, query order).
    """

    def __init__(self, graph: Graph, seed: int):
        self.graph = graph
        self.rng = np.random.default_rng(seed)
        self.non_neighbor_counts = graph.num_nodes - 1 - graph.degrees
        src, dst = graph.directed_edges()
        self._edge_keys = src * graph.num_nodes + dst  # sorted by CSR order

    def _draw(self, queries: np.ndarray) -> np.ndarray:
        """One valid draw per entry of `queries` (flat array of node ids)."""
        n = self.graph.num_nodes
        out = np.empty(queries.size, dtype=np.int64)
        pending = np.arange(queries.size)
        while pending.size:
            cand = self.rng.integers(0, n, size=pending.size)
            q = queries[pending]
            if self._edge_keys.size:
                keys = q * n + cand
                pos = np.searchsorted(self._edge_keys, keys)
                pos_c = np.minimum(pos, self._edge_keys.size - 1)
                is_neighbor = self._edge_keys[pos_c] == keys
            else:
                is_neighbor = np.zeros(pending.size, dtype=bool)
            ok = (cand != q) & ~is_neighbor
            out[pending[ok]] = cand[ok]
            pending = pending[~ok]
        return out

    def sample(self, node: int, k: int) -> np.ndarray:
        if not 0 <= node < self.graph.num_nodes:
            raise InputError(f"node id {node} out of range")
        if self.non_neighbor_counts[node] == 0:
            raise InputError(f"node {node} has no non-neighbors to sample from")
        return self._draw(np.full(k, node, dtype=np.int64))

    def edge_negatives(self, src: np.ndarray, dst: np.ndarray, k: int) -> np.ndarray:
        """k draws from the non-neighbors of each src node; dst is unused here
        but part of the protocol so replay samplers can key on the edge."""
        if src.size and (self.non_neighbor_counts[src] == 0).any():
            raise InputError("edge_negatives called with a source that has no non-neighbors")
        return self._draw(np.repeat(src, k)).reshape(src.size, k)


def sample_negatives(sampler: NegativeSampler, node: int, k: int) -> np.ndarray:
    """K uniform non-neighbor draws for one node (see NegativeSampler.sample)."""
    return sampler.sample(node, k)


def adam_step(params: ParamStore, m: dict, v: dict, learning_rate: float,
              betas: tuple[float, float], eps: float, weight_decay: float,
              step_count: int):
    """One bias-corrected Adam update; decoupled weight decay on weights only."""
    b1, b2 = betas
    c1 = 1.0 - b1 ** step_count
    c2 = 1.0 - b2 ** step_count
    for name, p in params.values.items():
        g = params.grads[name]
        m[name] = b1 * m[name] + (1.0 - b1) * g
        v[name] = b2 * v[name] + (1.0 - b2) * g * g
        update = (m[name] / c1) / (np.sqrt(v[name] / c2) + eps)
        if weight_decay > 0.0 and name in WEIGHT_NAMES:
            update = update + weight_decay * p
        p -= learning_rate * update


class Adam:
    """Stateful wrapper around adam_step with standard defaults."""

    def __init__(self, learning_rate: float = 0.01, betas=(0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.learning_rate = learning_rate
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self._m: dict = {}
        self._v: dict = {}

    def step(self, params: ParamStore):
        if not self._m:
            self._m = {k: np.zeros_like(p) for k, p in params.values.items()}
            self._v = {k: np.zeros_like(p) for k, p in params.values.items()}
        self.t += 1
        adam_step(params, self._m, self._v, self.learning_rate, self.betas,
                  self.eps, self.weight_decay, self.t)


def _grad_norm(params: ParamStore) -> float:
    total = 0.0
    for g in params.grads.values():
        total += float(np.sum(g * g))
    return float(np.sqrt(total))


def train(dataset, config: TrainConfig) -> tuple[ParamStore, list[dict]]:
    """Run the full training loop; returns final parameters and per-epoch log.

    Aborts with TrainingAbort (carrying the last finite parameters) if the
    loss ever turns non-finite.
    """
    config.validate()
    if dataset.partition.delta != config.loss.delta:
        raise ConfigError(
            f"dataset partition was built with delta={dataset.partition.delta}, "
            f"config requests delta={config.loss.delta}"
        )
    adj = normalize_adjacency(dataset.graph)
    ax = adj.matmul(dataset.features)
    params = init_params(dataset.features.shape[1], config.seed)
    sampler = NegativeSampler(dataset.graph, config.seed)
    opt = Adam(learning_rate=config.learning_rate, weight_decay=config.weight_decay)
    records: list[dict] = []
    last_good = params.copy()
    for epoch in range(1, config.epochs + 1):
        t0 = time.perf_counter()
        try:
            cache = forward_from_propagated(adj, ax, params)
            value, grad_y, grad_z = combined_objective(
                cache.y_hat, cache.z, dataset.partition, dataset.graph,
                config.loss, sampler)
        except NumericError as exc:
            raise TrainingAbort(f"{exc} at epoch {epoch}", epoch, last_good)
        if not np.isfinite(value.total):
            raise TrainingAbort(
                f"non-finite loss {value.total} at epoch {epoch}", epoch, last_good)
        last_good = params.copy()
        params.zero_grad()
        gcn_backward(cache, grad_y, grad_z, params)
        gnorm = _grad_norm(params)
        opt.step(params)
        if epoch % config.log_every == 0 or epoch == config.epochs:
            records.append({
                "epoch": epoch,
                "total": value.total,
                "parts": {k: float(p) for k, p in value.parts.items()},
                "grad_norm": gnorm,
                "wall_time_ms": (time.perf_counter() - t0) * 1e3,
            })
    return params, records

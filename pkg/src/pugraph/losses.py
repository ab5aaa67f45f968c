"""PU losses, the structural regularizer, and the combined training objective.

Every operation returns its value together with exact gradients w.r.t. the
per-node scores y_hat (and the representations Z for the regularizer). The
|.| subgradient at a kink is 0, as is the clamped branch of the nnPU max.

distpu_loss and distance_aware_loss share one distribution-matching core, so
the distance-aware loss with an empty far set and pi_hat = pi_p reduces to
the Dist-PU loss bit-exactly, not just approximately.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InputError
from .graph import DistancePartition, Graph
from .nn import sigmoid

log = logging.getLogger(__name__)

LOSS_KINDS = ("naive", "nnpu", "distpu", "distance_aware")


@dataclass
class LossConfig:
    """Loss selector plus the priors and regularizer knobs.

    pi_p is the overall positive prior (nnpu / distpu); pi_hat and pi_breve
    are the priors assumed for the near / far unlabeled subsets.
    """

    kind: str = "distance_aware"
    pi_p: float = 0.5
    pi_hat: float = 0.6
    pi_breve: float = 0.3
    delta: int = 3
    alpha: float = 0.01
    k: int = 50

    def validate(self):
        if self.kind not in LOSS_KINDS:
            raise ConfigError(f"unknown loss kind {self.kind!r}; expected one of {LOSS_KINDS}")
        for name in ("pi_p", "pi_hat", "pi_breve"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ConfigError(f"{name} must lie in (0, 1), got {v}")
        if self.kind == "distance_aware" and not self.pi_hat > self.pi_breve:
            raise ConfigError(
                f"distance_aware requires pi_hat > pi_breve, got {self.pi_hat} <= {self.pi_breve}"
            )
        if self.delta < 1:
            raise ConfigError(f"delta must be >= 1, got {self.delta}")
        if self.alpha < 0.0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if self.alpha > 0.0 and self.k < 1:
            raise ConfigError(f"k must be >= 1 when alpha > 0, got {self.k}")


@dataclass
class LossValue:
    """Total loss plus its named parts.

    The parts sum to the total with documented coefficients: every part
    enters with coefficient 1 except "regularizer", which is stored raw and
    enters the total multiplied by alpha.
    """

    total: float
    parts: dict[str, float] = field(default_factory=dict)


def _as_mask(labeled_mask: np.ndarray, n: int) -> np.ndarray:
    mask = np.asarray(labeled_mask)
    if mask.shape != (n,) or mask.dtype != bool:
        raise InputError(f"labeled_mask must be a boolean vector of length {n}")
    return mask


def naive_loss(y_hat: np.ndarray, labeled_mask: np.ndarray) -> tuple[LossValue, np.ndarray]:
    """Mean BCE with target 1 on labeled nodes and target 0 everywhere else."""
    y = np.asarray(y_hat, dtype=np.float64)
    mask = _as_mask(labeled_mask, y.shape[0])
    if not mask.any():
        raise InputError("naive_loss requires a nonempty labeled set")
    t = mask.astype(np.float64)
    n = y.shape[0]
    value = float(-np.mean(t * np.log(y) + (1.0 - t) * np.log(1.0 - y)))
    grad = (-t / y + (1.0 - t) / (1.0 - y)) / n
    return LossValue(value, {"supervised": value}), grad


def nnpu_loss(y_hat: np.ndarray, labeled_mask: np.ndarray,
              pi_p: float) -> tuple[LossValue, np.ndarray]:
    """Non-negative PU risk with the sigmoid surrogate.

    In score space the surrogate losses are l+(y) = 1 - y and l-(y) = y, so
    the estimator is pi_p * mean_L(1 - y) + max(0, mean_U(y) - pi_p * mean_L(y)).
    """
    y = np.asarray(y_hat, dtype=np.float64)
    mask = _as_mask(labeled_mask, y.shape[0])
    if not mask.any() or mask.all():
        raise InputError("nnpu_loss requires nonempty labeled and unlabeled sets")
    y_l, y_u = y[mask], y[~mask]
    pos_risk = pi_p * float(np.mean(1.0 - y_l))
    correction = float(np.mean(y_u)) - pi_p * float(np.mean(y_l))
    neg_risk = max(0.0, correction)
    grad = np.zeros_like(y)
    grad[mask] = -pi_p / y_l.size
    if correction > 0.0:
        grad[mask] += -pi_p / y_l.size
        grad[~mask] = 1.0 / y_u.size
    value = pos_risk + neg_risk
    return LossValue(value, {"supervised": pos_risk, "unlabeled": neg_risk}), grad


def _distribution_match(y: np.ndarray, labeled_ids: np.ndarray,
                        subsets: list[tuple[str, np.ndarray, float]],
                        ) -> tuple[LossValue, np.ndarray]:
    """2*(sum of priors)*|mean_L - 1| plus |mean_S - prior_S| per subset.

    Shared by distpu_loss and distance_aware_loss so that both evaluate the
    same expressions in the same order when the subset structure coincides.
    """
    if labeled_ids.size == 0:
        raise InputError("distribution-matching losses require labeled nodes")
    if not subsets:
        raise InputError("at least one unlabeled subset must be nonempty")
    prior_sum = 0.0
    for _, _, prior in subsets:
        prior_sum += prior
    coef = 2.0 * prior_sum
    mean_l = float(np.mean(y[labeled_ids]))
    supervised = coef * abs(mean_l - 1.0)
    grad = np.zeros_like(y)
    grad[labeled_ids] = coef * np.sign(mean_l - 1.0) / labeled_ids.size
    parts = {"supervised": supervised}
    total = supervised
    for name, ids, prior in subsets:
        mean_s = float(np.mean(y[ids]))
        term = abs(mean_s - prior)
        parts[name] = term
        total += term
        grad[ids] = np.sign(mean_s - prior) / ids.size
    return LossValue(total, parts), grad


def distpu_loss(y_hat: np.ndarray, labeled_mask: np.ndarray,
                pi_p: float) -> tuple[LossValue, np.ndarray]:
    """Label-distribution matching: 2*pi_p*|mean_L - 1| + |mean_U - pi_p|."""
    y = np.asarray(y_hat, dtype=np.float64)
    mask = _as_mask(labeled_mask, y.shape[0])
    labeled_ids = np.flatnonzero(mask)
    unlabeled_ids = np.flatnonzero(~mask)
    if unlabeled_ids.size == 0:
        raise InputError("distpu_loss requires a nonempty unlabeled set")
    value, grad = _distribution_match(y, labeled_ids, [("unlabeled", unlabeled_ids, pi_p)])
    return value, grad


def distance_aware_loss(y_hat: np.ndarray, partition: DistancePartition,
                        pi_hat: float, pi_breve: float) -> tuple[LossValue, np.ndarray]:
    """Distribution matching with per-subset priors over the distance partition.

    An empty near or far set drops its term and shrinks the supervised
    coefficient to twice the surviving prior, which makes the single-subset
    case coincide exactly with distpu_loss.
    """
    y = np.asarray(y_hat, dtype=np.float64)
    subsets = []
    if partition.near_unlabeled.size:
        subsets.append(("near", partition.near_unlabeled, pi_hat))
    if partition.far_unlabeled.size:
        subsets.append(("far", partition.far_unlabeled, pi_breve))
    if not subsets:
        raise InputError("both unlabeled subsets are empty")
    return _distribution_match(y, partition.labeled, subsets)


# Below this many nodes the regularizer goes through a dense n x n similarity
# matrix (one Gram product + one scalar scatter); above it, pairs stream in
# chunks to bound memory. Both paths compute the same sums.
DENSE_REG_NODES = 4096
_PAIR_CHUNK = 1 << 20


def structural_regularizer(z: np.ndarray, graph: Graph, sampler,
                           k: int) -> tuple[LossValue, np.ndarray]:
    """Push neighbor similarity toward 1 and sampled non-neighbor similarity to 0.

    Each undirected edge contributes from both endpoints; for the directed
    pair (i, j) the sampler draws k uniform non-neighbors of i. Nodes whose
    non-neighbor set is empty (complete graphs) skip their negative term.
    """
    if graph.num_edges < 1:
        raise InputError("structural_regularizer requires a graph with at least one edge")
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    z = np.asarray(z, dtype=np.float64)
    src, dst = graph.directed_edges()
    can_sample = sampler.non_neighbor_counts[src] > 0
    n_skipped = int((~can_sample).sum())
    if n_skipped:
        log.warning("structural_regularizer: skipped negative terms for %d directed edges "
                    "whose source has no non-neighbors", n_skipped)
    negs = sampler.edge_negatives(src[can_sample], dst[can_sample], k)
    pair_a = np.concatenate([src, np.repeat(src[can_sample], k)])
    pair_b = np.concatenate([dst, negs.ravel()])
    n_pos_pairs = src.size
    n = z.shape[0]
    if n <= DENSE_REG_NODES:
        return _regularizer_dense(z, pair_a, pair_b, n_pos_pairs)
    return _regularizer_streaming(z, pair_a, pair_b, n_pos_pairs)


def _pair_coefs(dots: np.ndarray, n_pos: int) -> tuple[float, np.ndarray]:
    """Value and d(value)/d(dot) per pair; the first n_pos pairs target 1."""
    s = sigmoid(dots)
    diff = s.copy()
    diff[:n_pos] -= 1.0
    value = float(np.dot(diff, diff))
    return value, 2.0 * diff * s * (1.0 - s)


def _regularizer_dense(z, pair_a, pair_b, n_pos):
    n = z.shape[0]
    gram = z @ z.T
    value, coef = _pair_coefs(gram[pair_a, pair_b], n_pos)
    # sum duplicate pairs into a dense coefficient matrix, then two matmuls
    c = np.bincount(pair_a * n + pair_b, weights=coef, minlength=n * n).reshape(n, n)
    grad = c @ z
    grad += c.T @ z
    return LossValue(value, {"regularizer": value}), grad


def _regularizer_streaming(z, pair_a, pair_b, n_pos):
    n = z.shape[0]
    grad = np.zeros_like(z)
    value = 0.0
    for lo in range(0, pair_a.size, _PAIR_CHUNK):
        hi = min(lo + _PAIR_CHUNK, pair_a.size)
        a, b = pair_a[lo:hi], pair_b[lo:hi]
        za, zb = z[a], z[b]
        chunk_value, coef = _pair_coefs(
            np.einsum("ij,ij->i", za, zb), max(0, min(n_pos - lo, hi - lo)))
        value += chunk_value
        # transposed contributions keep each column contiguous for bincount
        to_a = coef * zb.T
        to_b = coef * za.T
        for col in range(z.shape[1]):
            grad[:, col] += np.bincount(a, weights=to_a[col], minlength=n)
            grad[:, col] += np.bincount(b, weights=to_b[col], minlength=n)
    return LossValue(value, {"regularizer": value}), grad


def combined_objective(y_hat: np.ndarray, z: np.ndarray,
                       partition: DistancePartition, graph: Graph,
                       config: LossConfig, sampler,
                       ) -> tuple[LossValue, np.ndarray, np.ndarray]:
    """Selected PU loss plus alpha * structural regularizer.

    Returns (LossValue, dL/dy_hat, dL/dZ); the regularizer is attached only
    when alpha > 0, and its part is recorded raw (total adds alpha times it).
    """
    config.validate()
    y = np.asarray(y_hat, dtype=np.float64)
    n = y.shape[0]
    labeled_mask = np.zeros(n, dtype=bool)
    labeled_mask[partition.labeled] = True
    if config.kind == "naive":
        pu_value, grad_y = naive_loss(y, labeled_mask)
    elif config.kind == "nnpu":
        pu_value, grad_y = nnpu_loss(y, labeled_mask, config.pi_p)
    elif config.kind == "distpu":
        pu_value, grad_y = distpu_loss(y, labeled_mask, config.pi_p)
    else:
        pu_value, grad_y = distance_aware_loss(y, partition, config.pi_hat, config.pi_breve)
    parts = dict(pu_value.parts)
    total = pu_value.total
    grad_z = np.zeros_like(np.asarray(z, dtype=np.float64))
    if config.alpha > 0.0:
        reg_value, reg_grad = structural_regularizer(z, graph, sampler, config.k)
        parts["regularizer"] = reg_value.total
        total += config.alpha * reg_value.total
        grad_z = config.alpha * reg_grad
    return LossValue(total, parts), grad_y, grad_z

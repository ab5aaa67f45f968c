"""Two-layer GCN with a scalar sigmoid head, plus exact reverse-mode gradients.

Forward:
    H1 = ReLU(A_hat @ X @ W1 + b1)        (num_nodes x 16)
    Z  = A_hat @ H1 @ W2 + b2             (num_nodes x 16, fed to the regularizer)
    y  = sigmoid(Z @ w_head + b_head)     (per-node score in (0, 1))

All math is float64. The ReLU subgradient at 0 is taken as 0, and sigmoid
outputs are clipped to (Y_EPS, 1 - Y_EPS) so downstream logs stay finite.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, InputError, NumericError
from .graph import NormalizedAdjacency

HIDDEN_DIM = 16
Y_EPS = 1e-12

PARAM_SHAPES = {
    "W1": lambda d: (d, HIDDEN_DIM),
    "W2": lambda d: (HIDDEN_DIM, HIDDEN_DIM),
    "b1": lambda d: (HIDDEN_DIM,),
    "b2": lambda d: (HIDDEN_DIM,),
    "w_head": lambda d: (HIDDEN_DIM,),
    "b_head": lambda d: (),
}
WEIGHT_NAMES = ("W1", "W2", "w_head")  # weight decay applies to these only


class ParamStore:
    """Named dense parameters with paired gradient buffers."""

    def __init__(self, values: dict[str, np.ndarray]):
        self.values = {k: np.asarray(v, dtype=np.float64) for k, v in values.items()}
        self.grads = {k: np.zeros_like(v) for k, v in self.values.items()}

    def zero_grad(self):
        for g in self.grads.values():
            g[...] = 0.0

    def copy(self) -> "ParamStore":
        return ParamStore({k: v.copy() for k, v in self.values.items()})

    def names(self):
        return list(self.values)

    @property
    def feature_dim(self) -> int:
        return self.values["W1"].shape[0]


def init_params(feature_dim: int, seed: int) -> ParamStore:
    """Glorot-uniform weights (bound sqrt(6/(fan_in+fan_out))), zero biases."""
    if feature_dim < 1:
        raise ConfigError(f"feature_dim must be >= 1, got {feature_dim}")
    rng = np.random.default_rng(seed)

    def glorot(fan_in, fan_out, shape):
        bound = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-bound, bound, size=shape)

    return ParamStore({
        "W1": glorot(feature_dim, HIDDEN_DIM, (feature_dim, HIDDEN_DIM)),
        "W2": glorot(HIDDEN_DIM, HIDDEN_DIM, (HIDDEN_DIM, HIDDEN_DIM)),
        "b1": np.zeros(HIDDEN_DIM),
        "b2": np.zeros(HIDDEN_DIM),
        "w_head": glorot(HIDDEN_DIM, 1, (HIDDEN_DIM,)),
        "b_head": np.zeros(()),
    })


def sigmoid(x: np.ndarray) -> np.ndarray:
    """Numerically stable sigmoid (branch on sign, exponentiate -|x| only)."""
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


@dataclass
class ForwardCache:
    """Activations of one forward pass plus the operands backward needs."""

    h1: np.ndarray      # post-ReLU layer-1 output
    z: np.ndarray       # layer-2 output (representation)
    y_hat: np.ndarray   # head scores, clipped into (Y_EPS, 1 - Y_EPS)
    ax: np.ndarray      # A_hat @ X
    ah1: np.ndarray     # A_hat @ H1
    adj: NormalizedAdjacency


def _check_finite(arr: np.ndarray, layer: str):
    if not np.isfinite(arr).all():
        raise NumericError(f"non-finite values produced in {layer}")


def forward_from_propagated(adj: NormalizedAdjacency, ax: np.ndarray,
                            params: ParamStore) -> ForwardCache:
    """Forward pass given the precomputed A_hat @ X (constant across steps)."""
    v = params.values
    pre1 = ax @ v["W1"] + v["b1"]
    _check_finite(pre1, "layer1")
    h1 = np.maximum(pre1, 0.0)
    ah1 = adj.matmul(h1)
    z = ah1 @ v["W2"] + v["b2"]
    _check_finite(z, "layer2")
    score = z @ v["w_head"] + v["b_head"]
    y_hat = np.clip(sigmoid(score), Y_EPS, 1.0 - Y_EPS)
    return ForwardCache(h1=h1, z=z, y_hat=y_hat, ax=ax, ah1=ah1, adj=adj)


def gcn_forward(adj: NormalizedAdjacency, features: np.ndarray,
                params: ParamStore) -> ForwardCache:
    """Full forward pass of the two-layer GCN with sigmoid head."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[0] != adj.num_nodes:
        raise ConfigError(
            f"features shape {features.shape} does not match {adj.num_nodes} graph nodes"
        )
    if features.shape[1] != params.feature_dim:
        raise ConfigError(
            f"features have {features.shape[1]} columns, W1 expects {params.feature_dim}"
        )
    return forward_from_propagated(adj, adj.matmul(features), params)


def gcn_backward(cache: ForwardCache, d_yhat: np.ndarray, d_z: np.ndarray,
                 params: ParamStore):
    """Accumulate exact gradients of the composed forward into params.grads.

    Combines two upstream paths: d_yhat through the head and d_z directly
    into the layer-2 representation.
    """
    v, g = params.values, params.grads
    n = cache.y_hat.shape[0]
    if d_yhat.shape != (n,) or d_z.shape != cache.z.shape:
        raise ConfigError("upstream gradient shapes do not match the forward cache")
    s = cache.y_hat
    d_score = d_yhat * s * (1.0 - s)
    g["w_head"] += cache.z.T @ d_score
    g["b_head"] += d_score.sum()
    dz = d_z + np.outer(d_score, v["w_head"])
    g["W2"] += cache.ah1.T @ dz
    g["b2"] += dz.sum(axis=0)
    dh1 = cache.adj.matmul(dz @ v["W2"].T)  # A_hat is symmetric
    dpre1 = np.where(cache.h1 > 0.0, dh1, 0.0)
    g["W1"] += cache.ax.T @ dpre1
    g["b1"] += dpre1.sum(axis=0)


def pairwise_similarity(z: np.ndarray, i: int, j: int) -> float:
    """sigmoid(z_i . z_j); symmetric in (i, j)."""
    if not (0 <= i < z.shape[0] and 0 <= j < z.shape[0]):
        raise InputError(f"node ids ({i}, {j}) out of range for {z.shape[0]} rows")
    return float(sigmoid(z[i] @ z[j]))


# --- checkpoint format: one JSON header line, then raw little-endian float64 ---

def save_checkpoint(path, params: ParamStore):
    arrays = []
    offset = 0
    payload = []
    for name in sorted(params.values):
        # ascontiguousarray promotes 0-d to 1-d, so record the original shape
        arr = np.ascontiguousarray(params.values[name], dtype="<f8")
        arrays.append({
            "name": name,
            "shape": list(params.values[name].shape),
            "offset": offset,
            "nbytes": arr.nbytes,
        })
        payload.append(arr.tobytes())
        offset += arr.nbytes
    header = json.dumps(
        {"format": "pugraph-checkpoint-v1", "dtype": "<f8", "arrays": arrays},
        sort_keys=True, separators=(",", ":"),
    )
    with open(path, "wb") as fh:
        fh.write(header.encode("utf-8") + b"\n")
        fh.write(b"".join(payload))


def load_checkpoint(path) -> ParamStore:
    with open(path, "rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        if header.get("format") != "pugraph-checkpoint-v1":
            raise InputError(f"{path}: not a recognized checkpoint file")
        blob = fh.read()
    values = {}
    for meta in header["arrays"]:
        raw = blob[meta["offset"]:meta["offset"] + meta["nbytes"]]
        values[meta["name"]] = np.frombuffer(raw, dtype="<f8").reshape(meta["shape"]).copy()
    return ParamStore(values)

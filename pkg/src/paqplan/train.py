"""Model families and their iterative trainers.

Two linear binary classifiers are supported, both trained by full-batch
(sub)gradient descent over {0,1}-labeled data:

* ``logistic``: gradient of the negative log likelihood,
  ``X^T (sigma(Xw) - y) + lambda w``.
* ``linear_svm``: hinge-loss subgradient with labels mapped to {-1,+1},
  ``lambda w - sum_{y_i w.x_i < 1} y_i x_i``.

Several models sharing a feature space can be trained in one pass per
iteration by stacking their weight vectors into a d x k matrix, turning the
gradient into two dense matrix multiplies: ``X^T (sigma(XW) - Y) + lambda W``.
Column j of the batched gradient equals the single-model gradient of
column j, so batched and sequential training follow identical trajectories.

Nonlinear models come from cosine-of-random-projection feature expansion
(Gaussian projections approximate the RBF kernel, Cauchy the Laplacian).
"""

from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, DataSplit
from .space import Configuration

FAMILIES = ("logistic", "linear_svm")

MIN_EXPANDED_TRAIN_ROWS = 1000


def sigma(z):
    """Numerically stable logistic function, elementwise."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return float(out) if out.ndim == 0 else out


def _check_xy(X: np.ndarray, y: np.ndarray) -> None:
    if X.ndim != 2:
        raise ValueError("X must be 2-D")
    if y.shape != (X.shape[0],):
        raise ValueError(f"y shape {y.shape} does not match X rows {X.shape[0]}")


def logistic_gradient(w: np.ndarray, X: np.ndarray, y: np.ndarray, lam: float = 0.0) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_xy(X, y)
    if w.shape != (X.shape[1],):
        raise ValueError(f"w shape {w.shape} does not match X columns {X.shape[1]}")
    r = sigma(X @ w) - y
    return X.T @ r + lam * w


def batched_gradient(W: np.ndarray, X: np.ndarray, y: np.ndarray, lam=0.0) -> np.ndarray:
    """Logistic gradient for k stacked models; two matrix multiplies.

    ``lam`` may be a scalar or one value per column.
    """
    W = np.asarray(W, dtype=float)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_xy(X, y)
    if W.ndim != 2 or W.shape[0] != X.shape[1]:
        raise ValueError(f"W shape {W.shape} does not match X columns {X.shape[1]}")
    S = sigma(X @ W)
    return X.T @ (S - y[:, None]) + W * np.asarray(lam, dtype=float)


def hinge_subgradient(w: np.ndarray, X: np.ndarray, y: np.ndarray, lam: float = 0.0) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_xy(X, y)
    if w.shape != (X.shape[1],):
        raise ValueError(f"w shape {w.shape} does not match X columns {X.shape[1]}")
    yy = 2.0 * y - 1.0
    margins = yy * (X @ w)
    active = yy * (margins < 1.0)
    return lam * w - X.T @ active


def batched_hinge_subgradient(W: np.ndarray, X: np.ndarray, y: np.ndarray, lam=0.0) -> np.ndarray:
    """Column-wise hinge subgradient with elementwise margin masks."""
    W = np.asarray(W, dtype=float)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_xy(X, y)
    if W.ndim != 2 or W.shape[0] != X.shape[1]:
        raise ValueError(f"W shape {W.shape} does not match X columns {X.shape[1]}")
    yy = 2.0 * y - 1.0
    M = X @ W
    active = yy[:, None] * ((yy[:, None] * M) < 1.0)
    return W * np.asarray(lam, dtype=float) - X.T @ active


def _block_gradient(X, y, W, family: str, kernel: str) -> np.ndarray:
    """Data-plus-regularizer gradient of one contiguous row block."""
    if kernel == "matrix":
        if family == "logistic":
            return X.T @ (sigma(X @ W) - y[:, None])
        return batched_hinge_subgradient(W, X, y, 0.0)
    if kernel == "naive":
        cols = []
        for j in range(W.shape[1]):
            if family == "logistic":
                cols.append(logistic_gradient(W[:, j], X, y, 0.0))
            else:
                cols.append(hinge_subgradient(W[:, j], X, y, 0.0))
        return np.column_stack(cols)
    raise ValueError(f"unknown kernel {kernel!r}")


def data_gradient(X, y, W, family: str, kernel: str = "matrix",
                  partitions: list[tuple[int, int]] | None = None) -> np.ndarray:
    """Unregularized gradient over a (possibly partitioned) matrix.

    Partition partials are combined by an ordered sum over partition index,
    keeping results bit-identical for a fixed partitioning.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}")
    if not partitions or len(partitions) == 1:
        return _block_gradient(X, y, W, family, kernel)
    total = None
    for lo, hi in partitions:
        part = _block_gradient(X[lo:hi], y[lo:hi], W, family, kernel)
        total = part if total is None else total + part
    return total


@dataclass(eq=False)
class FeatureMap:
    """Identity pass-through or a cosine random-feature expansion.

    ``random_cosine`` maps a row x to sqrt(2/D) * cos(g_j . x + b_j) for D
    projection vectors g_j drawn from a Gaussian or Cauchy distribution
    (scaled by ``scale``, location-shifted by ``skew``) and phases b_j
    uniform on [0, 2*pi), all derived from ``seed``.
    """

    kind: str = "identity"
    projection: np.ndarray | None = None
    offsets: np.ndarray | None = None
    distribution: str = "gaussian"
    scale: float = 1.0
    skew: float = 0.0
    seed: int = 0

    @classmethod
    def identity(cls) -> "FeatureMap":
        return cls()

    @classmethod
    def random_cosine(cls, input_dim: int, output_dim: int, distribution: str = "gaussian",
                      scale: float = 1.0, skew: float = 0.0, seed: int = 0) -> "FeatureMap":
        if output_dim < 1:
            raise ValueError("output dimension must be positive")
        if distribution not in ("gaussian", "cauchy"):
            raise ValueError(f"unknown projection distribution {distribution!r}")
        rng = np.random.default_rng(seed)
        if distribution == "gaussian":
            proj = rng.standard_normal((input_dim, output_dim))
        else:
            proj = rng.standard_cauchy((input_dim, output_dim))
        proj = proj * scale + skew
        offsets = rng.uniform(0.0, 2.0 * np.pi, output_dim)
        return cls(kind="random_cosine", projection=proj, offsets=offsets,
                   distribution=distribution, scale=scale, skew=skew, seed=seed)

    @property
    def input_dim(self) -> int | None:
        return None if self.projection is None else int(self.projection.shape[0])

    @property
    def output_dim(self) -> int | None:
        return None if self.projection is None else int(self.projection.shape[1])

    def apply(self, X: np.ndarray) -> np.ndarray:
        if self.kind == "identity":
            return X
        D = self.output_dim or 1
        return np.sqrt(2.0 / D) * np.cos(X @ self.projection + self.offsets)

    def signature(self) -> tuple:
        if self.kind == "identity":
            return ("identity",)
        return ("random_cosine", self.output_dim, self.distribution,
                self.scale, self.skew, self.seed)


def random_features(X: np.ndarray, fmap: FeatureMap) -> np.ndarray:
    if fmap.kind != "random_cosine":
        raise ValueError("random_features requires a random_cosine map")
    if (fmap.output_dim or 0) < 1:
        raise ValueError("output dimension must be positive")
    return fmap.apply(np.asarray(X, dtype=float))


@dataclass(eq=False)
class ModelState:
    family: str
    config: Configuration
    weights: np.ndarray
    iterations_used: int = 0
    val_error: float | None = None
    feature_map: FeatureMap = field(default_factory=FeatureMap.identity)
    diverged: bool = False
    model_id: int = -1


def learning_rate(model: ModelState) -> float:
    try:
        return float(model.config.values["lr"])
    except KeyError as exc:
        raise ValueError("configuration must define a learning rate 'lr'") from exc


def l2_penalty(model: ModelState) -> float:
    return float(model.config.values.get("reg", 0.0))


def _map_seed(base_seed: int, parts: tuple) -> int:
    return zlib.crc32(repr((base_seed,) + parts).encode())


def make_model(config: Configuration, input_dim: int, base_seed: int = 0,
               default_family: str = "logistic", model_id: int = -1) -> ModelState:
    """Instantiate a zero-weight model for a configuration.

    Recognized configuration keys: ``lr`` (required), ``reg``, and the
    feature-expansion knobs ``proj`` (output dimension as a multiple of the
    input dimension), ``noise`` (projection scale), ``dist``
    (gaussian/cauchy), and ``skew``. The projection is seeded from the
    expansion knobs so equal expansions share features and can be batched.
    """
    family = config.family if config.family in FAMILIES else default_family
    values = config.values
    fmap = FeatureMap.identity()
    dim = input_dim
    if "proj" in values:
        out_dim = max(1, int(round(float(values["proj"]) * input_dim)))
        scale = float(values.get("noise", 1.0))
        dist = str(values.get("dist", "gaussian"))
        skew = float(values.get("skew", 0.0))
        seed = _map_seed(base_seed, (out_dim, dist, scale, skew))
        fmap = FeatureMap.random_cosine(input_dim, out_dim, distribution=dist,
                                        scale=scale, skew=skew, seed=seed)
        dim = out_dim
    model = ModelState(family=family, config=config, weights=np.zeros(dim),
                       feature_map=fmap, model_id=model_id)
    learning_rate(model)  # fail fast on configs without 'lr'
    return model


def batch_signature(model: ModelState) -> tuple:
    """Models with equal signatures share a feature space and may be batched."""
    return (model.family, len(model.weights)) + model.feature_map.signature()


@dataclass(eq=False)
class ModelBatch:
    """k models stacked column-wise into one weight matrix."""

    members: list[ModelState]
    W: np.ndarray = field(init=False)

    def __post_init__(self) -> None:
        if not self.members:
            raise ValueError("batch needs at least one member")
        sig = batch_signature(self.members[0])
        if any(batch_signature(m) != sig for m in self.members[1:]):
            raise ValueError("batch members must share family and feature space")
        self.W = np.column_stack([m.weights for m in self.members])

    @property
    def family(self) -> str:
        return self.members[0].family

    @property
    def feature_map(self) -> FeatureMap:
        return self.members[0].feature_map

    @property
    def k(self) -> int:
        return len(self.members)

    def sync_members(self) -> None:
        for j, m in enumerate(self.members):
            m.weights = self.W[:, j].copy()


def _train_row_limit(n_rows: int, fmap: FeatureMap) -> int:
    """Rows to train on; expanded feature spaces proportionally subsample.

    With output dimension D and input dimension d, use n * d / D rows,
    never fewer than MIN_EXPANDED_TRAIN_ROWS (or the dataset size).
    """
    if fmap.kind != "random_cosine":
        return n_rows
    d_in = fmap.input_dim or 1
    D = fmap.output_dim or 1
    wanted = int(round(n_rows * d_in / D))
    return min(n_rows, max(MIN_EXPANDED_TRAIN_ROWS, wanted))


def train_partial(batch: ModelBatch, split: DataSplit, iters: int,
                  eta_schedule=None, kernel: str = "matrix") -> ModelBatch:
    """Run ``iters`` full-data gradient steps on every member of the batch.

    One scan of the training data per iteration regardless of batch width;
    per-model learning rates are applied column-wise. A member whose weights
    go non-finite is rolled back one step, marked diverged with validation
    error 1.0, and its column is frozen for the rest of the run.
    """
    if iters < 1:
        raise ValueError("iters must be at least 1")
    train_ds = split.train
    fmap = batch.feature_map
    limit = _train_row_limit(train_ds.n, fmap)
    if fmap.kind == "identity" and limit == train_ds.n:
        Xt, yt = train_ds.X, train_ds.y
        parts = train_ds.partitions
    else:
        Xt = fmap.apply(train_ds.X[:limit])
        yt = train_ds.y[:limit]
        parts = [(0, limit)]
    yt = yt.astype(float)

    members = batch.members
    etas = np.array([learning_rate(m) for m in members])
    lams = np.array([l2_penalty(m) for m in members])
    frozen = np.array([m.diverged for m in members])
    W = batch.W

    # Overflow on a pre-divergence step is expected; the non-finite column is
    # rolled back and frozen below.
    with np.errstate(over="ignore", invalid="ignore"):
        for t in range(iters):
            train_ds.notify_scan(len(members))
            G = data_gradient(Xt, yt, W, batch.family, kernel, parts) + W * lams[None, :]
            if eta_schedule is None:
                steps = etas
            else:
                steps = etas * np.array([eta_schedule(m.iterations_used + t) for m in members])
            W_next = W - G * steps[None, :]
            if frozen.any():
                W_next[:, frozen] = W[:, frozen]
            bad = ~np.isfinite(W_next).all(axis=0) & ~frozen
            if bad.any():
                W_next[:, bad] = W[:, bad]
                frozen |= bad
                for j in np.flatnonzero(bad):
                    members[j].diverged = True
            W = W_next

    batch.W = W
    batch.sync_members()
    for m in members:
        m.iterations_used += iters

    val = split.validation
    if val.n > 0:
        with np.errstate(over="ignore", invalid="ignore"):
            margins = fmap.apply(val.X) @ W
        errors = np.mean((margins >= 0.0) != (val.y[:, None] == 1), axis=0)
        for j, m in enumerate(members):
            m.val_error = 1.0 if m.diverged else float(errors[j])
    else:
        for m in members:
            m.val_error = 1.0 if m.diverged else m.val_error
    return batch


def evaluate(model: ModelState, ds: Dataset) -> float:
    """Fraction of misclassified points under the fixed w.x >= 0 threshold."""
    if ds.n == 0:
        raise ValueError("cannot evaluate on an empty split")
    Xf = model.feature_map.apply(ds.X)
    if Xf.shape[1] != len(model.weights):
        raise ValueError("weight dimension does not match the split's features")
    preds = Xf @ model.weights >= 0.0
    return float(np.mean(preds != (ds.y == 1)))

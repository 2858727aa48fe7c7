"""SVD-NN pipeline: design matrix, truncated-SVD subspace, shallow network.

Epochs are flattened column-wise (all channels at sample 0, then sample 1,
...), stacked, and reshaped into rows of ``width`` values. The right
singular vectors of that matrix span the subspace; an epoch is described by
the mean of its rows' coordinates in the leading ``k`` directions.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np

from .core import EpochSet
from .errors import (DimensionMismatch, FormatError, KOutOfRange, NonFiniteLoss, NotDivisible,
                     SingleClass, UnknownEpoch)
from .numerics import svd
from .optim import Adam, bce_with_logits, sigmoid

DEFAULT_WIDTH = 384
DEFAULT_K_GRID = (8, 16, 32, 64, 96, 128, 160, 192, 224, 256, 320, 384)
MSNN_MAGIC = b"MSNN"
MSNN_VERSION = 1


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    matrix: np.ndarray     # rows x width
    row_owner: np.ndarray  # epoch index of every row
    width: int
    rows_per_epoch: int
    labels: np.ndarray | None = None
    uids: tuple = ()

    @property
    def n_epochs(self) -> int:
        return len(self.matrix) // self.rows_per_epoch


def build_design_matrix(epochs, width: int = DEFAULT_WIDTH) -> DesignMatrix:
    if isinstance(epochs, EpochSet):
        data, labels, uids = epochs.data, epochs.labels, tuple(epochs.uids)
    else:
        data, labels, uids = np.asarray(epochs, dtype=float), None, ()
    n, c, L = data.shape
    size = c * L
    if size % width:
        raise NotDivisible(f"{c} channels x {L} samples = {size} values; {size} % {width} = {size % width}")
    rows = size // width
    # column-wise flattening of each (c, L) epoch == row-major flattening of (L, c)
    matrix = np.ascontiguousarray(data.transpose(0, 2, 1)).reshape(n * rows, width)
    owner = np.repeat(np.arange(n), rows)
    return DesignMatrix(matrix, owner, width, rows, labels, uids)


@dataclass(frozen=True, eq=False)
class SvdBasis:
    v_k: np.ndarray       # width x k
    sigma: np.ndarray     # top-k singular values
    tail_energy: float    # sum of squared singular values beyond k

    @property
    def k(self) -> int:
        return self.v_k.shape[1]


@dataclass(frozen=True, eq=False)
class FullBasis:
    """All right singular vectors of one design matrix; truncate per k."""
    v: np.ndarray
    sigma: np.ndarray

    def truncate(self, k: int) -> SvdBasis:
        kmax = self.v.shape[1]
        if not 1 <= k <= kmax:
            raise KOutOfRange(f"k must be in [1, {kmax}], got {k}")
        return SvdBasis(self.v[:, :k], self.sigma[:k], float(np.sum(self.sigma[k:] ** 2)))


def full_basis(dm: DesignMatrix) -> FullBasis:
    res = svd(dm.matrix)
    return FullBasis(res.v, res.sigma)


def fit_basis(dm: DesignMatrix, k: int) -> SvdBasis:
    kmax = min(dm.matrix.shape)
    if not 1 <= k <= kmax:
        raise KOutOfRange(f"k must be in [1, {kmax}], got {k}")
    return full_basis(dm).truncate(k)


def reconstruct(dm: DesignMatrix, basis: SvdBasis) -> np.ndarray:
    """Rank-k (denoised) version of the design matrix."""
    return dm.matrix @ basis.v_k @ basis.v_k.T


def all_epoch_features(dm: DesignMatrix, basis: SvdBasis) -> np.ndarray:
    """Mean row projection of every epoch, shape (n_epochs, k)."""
    proj = dm.matrix @ basis.v_k
    return proj.reshape(-1, dm.rows_per_epoch, basis.k).mean(axis=1)


def epoch_features(dm: DesignMatrix, basis: SvdBasis, epoch_index: int) -> np.ndarray:
    rows = np.flatnonzero(dm.row_owner == epoch_index)
    if rows.size == 0:
        raise UnknownEpoch(epoch_index)
    return (dm.matrix[rows] @ basis.v_k).mean(axis=0)


# ---------------------------------------------------------------- network

@dataclass(frozen=True)
class NnConfig:
    lr: float = 4e-4
    batch_size: int = 32
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0
    hidden: tuple[int, ...] | None = None  # None -> (64 or 32, 8)


def hidden_sizes(k: int) -> tuple[int, int]:
    return (64 if k > 128 else 32, 8)


@dataclass(eq=False)
class NnModel:
    weights: list            # per layer (fan_in, fan_out)
    biases: list
    feature_mean: np.ndarray
    feature_scale: np.ndarray
    config: NnConfig = field(default_factory=NnConfig)
    final_loss: float = float("nan")
    epochs_trained: int = 0

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.input_dim] + [w.shape[1] for w in self.weights]

    def params(self) -> dict[str, np.ndarray]:
        out = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            out[f"W{i}"], out[f"b{i}"] = w, b
        return out

    def set_params(self, params) -> None:
        n = len(self.weights)
        self.weights = [params[f"W{i}"] for i in range(n)]
        self.biases = [params[f"b{i}"] for i in range(n)]


def init_nn(k: int, cfg: NnConfig = NnConfig(), rng=None) -> NnModel:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    sizes = [k, *(cfg.hidden or hidden_sizes(k)), 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        lim = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-lim, lim, (fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return NnModel(weights, biases, np.zeros(k), np.ones(k), cfg)


def _nn_forward(params, X, n_layers):
    acts = [X]
    a = X
    for i in range(n_layers - 1):
        a = np.maximum(a @ params[f"W{i}"] + params[f"b{i}"], 0.0)
        acts.append(a)
    logits = (a @ params[f"W{n_layers - 1}"] + params[f"b{n_layers - 1}"])[:, 0]
    return logits, acts


def _nn_loss_and_grads(params, X, y, n_layers):
    logits, acts = _nn_forward(params, X, n_layers)
    loss = bce_with_logits(logits, y)
    delta = ((sigmoid(logits) - y) / len(y))[:, None]
    grads = {}
    for i in reversed(range(n_layers)):
        grads[f"W{i}"] = acts[i].T @ delta
        grads[f"b{i}"] = delta.sum(axis=0)
        if i:
            delta = (delta @ params[f"W{i}"].T) * (acts[i] > 0)
    return loss, grads


def nn_loss_and_grads(model: NnModel, X, y):
    """BCE and analytic gradients on raw (already standardized) inputs."""
    return _nn_loss_and_grads(model.params(), np.asarray(X, float), np.asarray(y, float), len(model.weights))


def _standardize(model: NnModel, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None]
    if X.shape[1] != model.input_dim:
        raise DimensionMismatch(f"model expects {model.input_dim} inputs, got {X.shape[1]}")
    return (X - model.feature_mean) / model.feature_scale


def _accuracy(model: NnModel, Xs, y) -> float:
    logits, _ = _nn_forward(model.params(), Xs, len(model.weights))
    return float(np.mean((logits > 0).astype(int) == y))


def train_nn(features, labels, cfg: NnConfig = NnConfig(), val=None) -> NnModel:
    """Adam on BCE.

    With ``val=(features, labels)`` training stops after ``patience`` epochs
    without a new best validation loss and the best weights are kept;
    otherwise it runs ``max_epochs``.
    """
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels).astype(float)
    if not (np.any(y == 1) and np.any(y == 0)):
        raise SingleClass("network training needs both labels")
    rng = np.random.default_rng(cfg.seed)
    model = init_nn(X.shape[1], cfg, rng)
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    model.feature_mean, model.feature_scale = mean, scale
    Xs = (X - mean) / scale
    if val is not None:
        Xv = _standardize(model, val[0])
        yv = np.asarray(val[1]).astype(float)
    params = model.params()
    n_layers = len(model.weights)
    opt = Adam(cfg.lr)
    best = (np.inf, None, 0)
    stale = 0
    loss_epoch = np.nan
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(len(y))
        total = 0.0
        for start in range(0, len(y), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = _nn_loss_and_grads(params, Xs[idx], y[idx], n_layers)
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"loss became {loss} in epoch {epoch}")
            opt.step(params, grads)
            total += loss * len(idx)
        loss_epoch = total / len(y)
        if val is None:
            continue
        vloss = bce_with_logits(_nn_forward(params, Xv, n_layers)[0], yv)
        if vloss < best[0]:
            best = (vloss, {k: v.copy() for k, v in params.items()}, epoch)
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    if val is not None and best[1] is not None:
        params = best[1]
        model.epochs_trained = best[2]
    else:
        model.epochs_trained = cfg.max_epochs
    model.set_params(params)
    model.final_loss = bce_with_logits(_nn_forward(params, Xs, n_layers)[0], y) if val is not None else loss_epoch
    return model


def predict_proba(model: NnModel, X) -> np.ndarray:
    logits, _ = _nn_forward(model.params(), _standardize(model, X), len(model.weights))
    return sigmoid(logits)


def predict_nn(model: NnModel, feature) -> float:
    return float(predict_proba(model, np.asarray(feature, dtype=float)[None])[0])


# ---------------------------------------------------------- model selection

def score_k_grid(train: DesignMatrix, val: DesignMatrix, grid, cfg: NnConfig = NnConfig(),
                 basis: FullBasis | None = None) -> dict[int, float]:
    """Validation accuracy for every k; the basis is fitted on ``train`` only."""
    if train.labels is None or val.labels is None:
        raise ValueError("design matrices need labels for model selection")
    basis = full_basis(train) if basis is None else basis
    scores = {}
    for k in grid:
        b = basis.truncate(int(k))
        Xtr = all_epoch_features(train, b)
        Xva = all_epoch_features(val, b)
        model = train_nn(Xtr, train.labels, cfg)
        scores[int(k)] = _accuracy(model, _standardize(model, Xva), val.labels)
    return scores


def select_k(train: DesignMatrix, val: DesignMatrix, grid=DEFAULT_K_GRID, cfg: NnConfig = NnConfig(),
             refine: int = 0, scores: dict | None = None) -> int:
    """k with the best validation accuracy (ties go to the smaller k).

    ``refine > 0`` adds a second pass at ``winner +- refine/2`` and
    ``winner +- refine``. Pass a dict as ``scores`` to receive every score.
    """
    grid = sorted({int(k) for k in grid})
    if not grid:
        raise ValueError("empty k grid")
    kmax = min(train.matrix.shape)
    for k in grid:
        if not 1 <= k <= kmax:
            raise KOutOfRange(f"k must be in [1, {kmax}], got {k}")
    basis = full_basis(train)
    result = score_k_grid(train, val, grid, cfg, basis)
    if refine > 0:
        best = max(result, key=lambda k: (result[k], -k))
        step = max(refine // 2, 1)
        extra = [best + d for d in (-refine, -step, step, refine)]
        extra = [k for k in extra if 1 <= k <= kmax and k not in result]
        result.update(score_k_grid(train, val, extra, cfg, basis))
    if scores is not None:
        scores.update(result)
    return max(result, key=lambda k: (result[k], -k))


# ----------------------------------------------------------------- pipeline

@dataclass(eq=False)
class SvdNn:
    basis: SvdBasis
    model: NnModel
    width: int = DEFAULT_WIDTH

    def predict_proba(self, epochs) -> np.ndarray:
        dm = build_design_matrix(epochs, self.width)
        return predict_proba(self.model, all_epoch_features(dm, self.basis))


# serialization: see docs/formats.md
_MSNN_HEADER = struct.Struct("<4sHH")


def dump_svdnn(pipe: SvdNn) -> bytes:
    m = pipe.model
    sizes = m.layer_sizes
    buf = io.BytesIO()
    buf.write(_MSNN_HEADER.pack(MSNN_MAGIC, MSNN_VERSION, len(m.weights)))
    buf.write(struct.pack(f"<{len(sizes)}I", *sizes))
    parts = [m.feature_mean, m.feature_scale]
    for w, b in zip(m.weights, m.biases):
        parts += [w.ravel(), b]
    buf.write(np.concatenate(parts).astype("<f4").tobytes())
    v = pipe.basis.v_k
    buf.write(struct.pack("<II", v.shape[0], v.shape[1]))
    buf.write(np.concatenate([v.ravel(), pipe.basis.sigma, [pipe.basis.tail_energy]]).astype("<f4").tobytes())
    return buf.getvalue()


def load_svdnn(blob: bytes) -> SvdNn:
    try:
        magic, version, n_layers = _MSNN_HEADER.unpack_from(blob)
        if magic != MSNN_MAGIC:
            raise FormatError(f"bad magic {magic!r}")
        if version != MSNN_VERSION:
            raise FormatError(f"unsupported MSNN version {version}")
        pos = _MSNN_HEADER.size
        sizes = struct.unpack_from(f"<{n_layers + 1}I", blob, pos)
        pos += 4 * (n_layers + 1)
        n_net = 2 * sizes[0] + sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))
        net = np.frombuffer(blob, "<f4", n_net, pos).astype(float)
        pos += 4 * n_net
        width, k = struct.unpack_from("<II", blob, pos)
        pos += 8
        tail = np.frombuffer(blob, "<f4", width * k + k + 1, pos).astype(float)
        if pos + 4 * tail.size != len(blob):
            raise FormatError("trailing bytes after MSNN basis")
    except struct.error as exc:
        raise FormatError(f"truncated MSNN blob: {exc}") from exc
    except ValueError as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"truncated MSNN blob: {exc}") from exc
    d = sizes[0]
    mean, scale = net[:d], net[d:2 * d]
    p = 2 * d
    weights, biases = [], []
    for a, b in zip(sizes[:-1], sizes[1:]):
        weights.append(net[p:p + a * b].reshape(a, b))
        p += a * b
        biases.append(net[p:p + b])
        p += b
    model = NnModel(weights, biases, mean, scale, NnConfig(hidden=tuple(sizes[1:-1])))
    basis = SvdBasis(tail[:width * k].reshape(width, k), tail[width * k:width * k + k], float(tail[-1]))
    return SvdNn(basis, model, width)

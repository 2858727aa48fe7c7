"""CSP-LDA-LSTM pipeline: sub-epoch CSP features, LDA scalars, LSTM classifier.

Each 256-sample window is cut into four 64-sample sub-epochs. Every
sub-epoch becomes a 20-D log-variance vector (10 CSP filter pairs), LDA
squashes it to one number, and the four numbers in time order form the
sequence a single-layer LSTM classifies.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field, replace

import numpy as np

from .core import Condition, EpochSet
from .csp import SpatialFilterBank, class_covariance, fit_csp, log_variance_features
from .errors import FormatError, LengthNotDivisible, NonFiniteLoss, SingleClass
from .lda import LdaModel, fit_lda
from .optim import Adam, bce_with_logits, sigmoid

SUB_EPOCH_LEN = 64
MLSM_MAGIC = b"MLSM"
MLSM_VERSION = 1


@dataclass(frozen=True, eq=False)
class ScalarSequence:
    values: np.ndarray
    label: int
    subject_id: str
    parent_uid: tuple | None = None


@dataclass(frozen=True)
class LstmConfig:
    hidden: int = 200
    epochs: int = 20
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 32
    seed: int = 0
    forget_bias: float = 1.0
    dtype: str = "float32"  # training precision; gradient checks use float64


@dataclass(eq=False)
class LstmModel:
    """Gate order in the stacked weights is input, forget, candidate, output."""
    Wx: np.ndarray   # (input, 4H)
    Wh: np.ndarray   # (H, 4H)
    b: np.ndarray    # (4H,)
    w_out: np.ndarray  # (H,)
    b_out: float
    input_shift: float = 0.0
    input_scale: float = 1.0
    config: LstmConfig = field(default_factory=LstmConfig)
    loss_history: list = field(default_factory=list)

    @property
    def hidden(self) -> int:
        return self.Wh.shape[0]

    @property
    def input_size(self) -> int:
        return self.Wx.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        return {"Wx": self.Wx, "Wh": self.Wh, "b": self.b, "w_out": self.w_out,
                "b_out": np.atleast_1d(np.asarray(self.b_out, dtype=float))}

    def set_params(self, params: dict[str, np.ndarray]) -> None:
        self.Wx, self.Wh, self.b, self.w_out = params["Wx"], params["Wh"], params["b"], params["w_out"]
        self.b_out = float(np.asarray(params["b_out"]).reshape(-1)[0])


def init_lstm(input_size: int = 1, cfg: LstmConfig = LstmConfig(), rng=None) -> LstmModel:
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases except the forget gate."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    H = cfg.hidden
    Wx = rng.uniform(-1, 1, (input_size, 4 * H)) / np.sqrt(input_size)
    Wh = rng.uniform(-1, 1, (H, 4 * H)) / np.sqrt(H)
    b = np.zeros(4 * H)
    b[H:2 * H] = cfg.forget_bias
    w_out = rng.uniform(-1, 1, H) / np.sqrt(H)
    return LstmModel(Wx, Wh, b, w_out, 0.0, config=cfg)


def _forward(params, X):
    """X: (B, T, I). Returns logits, the last hidden state and the BPTT cache."""
    Wh = params["Wh"]
    B, T, _ = X.shape
    H = Wh.shape[0]
    dt = Wh.dtype
    zx = X @ params["Wx"] + params["b"]          # input contribution for every step
    h_prev = np.zeros((T + 1, B, H), dt)
    c_prev = np.zeros((T + 1, B, H), dt)
    gates = np.empty((T, B, 4 * H), dt)
    tcs = np.empty((T, B, H), dt)
    for t in range(T):
        z = zx[:, t] + h_prev[t] @ Wh
        a = gates[t]
        a[:] = sigmoid(z)
        a[:, 2 * H:3 * H] = np.tanh(z[:, 2 * H:3 * H])
        i, f, g, o = a[:, :H], a[:, H:2 * H], a[:, 2 * H:3 * H], a[:, 3 * H:]
        c_prev[t + 1] = f * c_prev[t] + i * g
        tcs[t] = np.tanh(c_prev[t + 1])
        h_prev[t + 1] = o * tcs[t]
    h = h_prev[T]
    logits = h @ params["w_out"] + params["b_out"][0]
    return logits, h, (h_prev, c_prev, gates, tcs)


def _loss_and_grads(params, X, y):
    logits, h_last, (h_prev, c_prev, gates, tcs) = _forward(params, X)
    loss = bce_with_logits(logits, y)
    B, T, I = X.shape
    Wh = params["Wh"]
    H = Wh.shape[0]
    dt = Wh.dtype
    dlogit = ((sigmoid(logits) - y) / B).astype(dt)
    grads = {"w_out": h_last.T @ dlogit, "b_out": np.array([dlogit.sum()], dt)}
    dh = np.outer(dlogit, params["w_out"])
    dc = np.zeros((B, H), dt)
    dZ = np.empty((T, B, 4 * H), dt)
    for t in reversed(range(T)):
        a, tc = gates[t], tcs[t]
        i, f, g, o = a[:, :H], a[:, H:2 * H], a[:, 2 * H:3 * H], a[:, 3 * H:]
        dc += dh * o * (1.0 - tc * tc)
        dz = dZ[t]
        dz[:, :H] = dc * g * i * (1 - i)
        dz[:, H:2 * H] = dc * c_prev[t] * f * (1 - f)
        dz[:, 2 * H:3 * H] = dc * i * (1 - g * g)
        dz[:, 3 * H:] = dh * tc * o * (1 - o)
        dh = dz @ Wh.T
        dc *= f
    flat = dZ.reshape(T * B, 4 * H)
    grads["Wx"] = X.transpose(1, 0, 2).reshape(T * B, I).T @ flat
    grads["Wh"] = h_prev[:T].reshape(T * B, H).T @ flat
    grads["b"] = flat.sum(axis=0)
    return loss, grads


def loss_and_grads(model: LstmModel, X, y):
    """BCE loss and analytic gradients for raw (already normalized) inputs."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 2:
        X = X[:, :, None]
    params = {k: np.asarray(v, dtype=float) for k, v in model.params().items()}
    return _loss_and_grads(params, X, np.asarray(y, dtype=float))


def _to_array(seqs) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([np.asarray(s.values, dtype=float) for s in seqs])
    y = np.array([int(s.label) for s in seqs], dtype=float)
    return X, y


def train_lstm(seqs, cfg: LstmConfig = LstmConfig()) -> LstmModel:
    """Minibatch Adam on BCE; inputs are standardized with training statistics."""
    X, y = _to_array(seqs)
    if not (np.any(y == 1) and np.any(y == 0)):
        raise SingleClass("LSTM training needs both labels")
    rng = np.random.default_rng(cfg.seed)
    model = init_lstm(1, cfg, rng)
    shift = float(X.mean())
    scale = float(X.std()) or 1.0
    model.input_shift, model.input_scale = shift, scale
    dt = np.dtype(cfg.dtype)
    Xn = ((X - shift) / scale)[:, :, None].astype(dt)
    y = y.astype(dt)
    params = {k: v.astype(dt) for k, v in model.params().items()}
    opt = Adam(cfg.lr, cfg.beta1, cfg.beta2, cfg.eps)
    history = [_loss_and_grads(params, Xn, y)[0]]
    n = len(y)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = _loss_and_grads(params, Xn[idx], y[idx])
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"loss became {loss} after {opt.t} steps")
            opt.step(params, grads)
            total += loss * len(idx)
        history.append(total / n)
    model.set_params(params)
    model.loss_history = history
    return model


def predict_proba(model: LstmModel, seqs) -> np.ndarray:
    X = np.stack([np.asarray(getattr(s, "values", s), dtype=float) for s in seqs])
    Xn = ((X - model.input_shift) / model.input_scale)[:, :, None]
    params = {k: np.asarray(v, dtype=float) for k, v in model.params().items()}
    logits, _, _ = _forward(params, Xn)
    return sigmoid(logits)


def predict_lstm(model: LstmModel, seq) -> float:
    return float(predict_proba(model, [seq])[0])


def split_sub_epochs(data: np.ndarray, sub_len: int = SUB_EPOCH_LEN) -> np.ndarray:
    """(n, c, L) -> (n, L // sub_len, c, sub_len), each piece re-centred per channel."""
    n, c, L = data.shape
    if L % sub_len:
        raise LengthNotDivisible(f"epoch length {L} is not a multiple of {sub_len}")
    parts = data.reshape(n, c, L // sub_len, sub_len).transpose(0, 2, 1, 3)
    return parts - parts.mean(axis=3, keepdims=True)


def sub_epoch_features(epochs: EpochSet, bank: SpatialFilterBank, sub_len: int = SUB_EPOCH_LEN) -> np.ndarray:
    """Log-variance features of every sub-epoch, shape (n, T, 2 * n_pairs)."""
    parts = split_sub_epochs(epochs.data, sub_len)
    n, T, c, s = parts.shape
    feats = log_variance_features(parts.reshape(n * T, c, s), bank)
    return feats.reshape(n, T, -1)


def build_sequences(epochs256: EpochSet, bank: SpatialFilterBank, lda: LdaModel,
                    sub_len: int = SUB_EPOCH_LEN) -> list[ScalarSequence]:
    """One LDA-scalar sequence per parent window, sub-epochs in time order."""
    feats = sub_epoch_features(epochs256, bank, sub_len)
    scalars = lda.project(feats)
    return [ScalarSequence(scalars[i], int(ep.label), ep.subject_id, ep.uid)
            for i, ep in enumerate(epochs256)]


@dataclass(eq=False)
class CspLdaLstm:
    """Fitted front end (CSP bank + LDA) plus the LSTM."""
    bank: SpatialFilterBank
    lda: LdaModel
    lstm: LstmModel

    def predict_proba(self, epochs256: EpochSet) -> np.ndarray:
        return predict_proba(self.lstm, build_sequences(epochs256, self.bank, self.lda))


def fit_csp_lda_lstm(train: EpochSet, n_pairs: int = 10, alpha: float = 0.0,
                     cfg: LstmConfig = LstmConfig()) -> CspLdaLstm:
    """CSP and LDA are fitted on the training sub-epochs only."""
    labels = train.labels
    parts = split_sub_epochs(train.data)
    n, T, c, s = parts.shape
    sub_labels = np.repeat(labels, T)
    flat = parts.reshape(n * T, c, s)
    bank = fit_csp(class_covariance(flat[sub_labels == Condition.MEDITATION]),
                   class_covariance(flat[sub_labels == Condition.REST]), alpha, n_pairs)
    feats = log_variance_features(flat, bank)
    lda = fit_lda(feats, sub_labels)
    seqs = build_sequences(train, bank, lda)
    return CspLdaLstm(bank, lda, train_lstm(seqs, cfg))


# serialization: see docs/formats.md
_MLSM_HEADER = struct.Struct("<4sHHII")


def dump_lstm(model: LstmModel) -> bytes:
    buf = io.BytesIO()
    buf.write(_MLSM_HEADER.pack(MLSM_MAGIC, MLSM_VERSION, model.input_size, model.hidden, 0))
    body = np.concatenate([
        [model.input_shift, model.input_scale],
        model.Wx.ravel(), model.Wh.ravel(), model.b, model.w_out, [model.b_out],
    ]).astype("<f4")
    buf.write(body.tobytes())
    return buf.getvalue()


def load_lstm(blob: bytes) -> LstmModel:
    if len(blob) < _MLSM_HEADER.size:
        raise FormatError("MLSM blob too short")
    magic, version, I, H, _ = _MLSM_HEADER.unpack_from(blob)
    if magic != MLSM_MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != MLSM_VERSION:
        raise FormatError(f"unsupported MLSM version {version}")
    n = 2 + I * 4 * H + H * 4 * H + 4 * H + H + 1
    body = np.frombuffer(blob, dtype="<f4", offset=_MLSM_HEADER.size).astype(float)
    if body.size != n:
        raise FormatError(f"MLSM body has {body.size} floats, expected {n}")
    pos = 2
    def take(k):
        nonlocal pos
        out = body[pos:pos + k]
        pos += k
        return out
    Wx = take(I * 4 * H).reshape(I, 4 * H)
    Wh = take(H * 4 * H).reshape(H, 4 * H)
    b = take(4 * H)
    w_out = take(H)
    b_out = float(take(1)[0])
    return LstmModel(Wx, Wh, b, w_out, b_out, float(body[0]), float(body[1]),
                     config=replace(LstmConfig(), hidden=H))

"""Uniform fit/predict wrappers around the three classifiers.

Every pipeline records the ids of all epochs it touched while fitting
(``fit_uids``) so cross-validation can audit train/test separation.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .core import Condition, EpochSet
from .csp import class_covariance, epoch_scatters, fit_csp, log_variance_features
from .lda import fit_lda
from .lstm import LstmConfig, fit_csp_lda_lstm
from .svdnn import (DEFAULT_K_GRID, DEFAULT_WIDTH, NnConfig, SvdNn, all_epoch_features,
                    build_design_matrix, fit_basis, select_k, train_nn)


class PipelineKind(str, Enum):
    CSP_LDA = "CspLda"
    CSP_LDA_LSTM = "CspLdaLstm"
    SVD_NN = "SvdNn"

    @classmethod
    def parse(cls, value) -> "PipelineKind":
        if isinstance(value, cls):
            return value
        key = str(value).replace("-", "").replace("_", "").lower()
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        raise ValueError(f"unknown pipeline {value!r}")


EPOCH_LEN = {PipelineKind.CSP_LDA: 256, PipelineKind.CSP_LDA_LSTM: 256, PipelineKind.SVD_NN: 128}


def _stratified_split(labels, fraction, rng):
    """Indices (keep, held_out) with ``round(fraction * n_c)`` held out per class."""
    held = []
    for c in (0, 1):
        idx = np.flatnonzero(labels == c)
        n_val = int(round(fraction * len(idx)))
        held.extend(rng.permutation(idx)[:n_val].tolist())
    held = np.sort(np.array(held, dtype=int))
    keep = np.setdiff1d(np.arange(len(labels)), held)
    return keep, held


class CspLdaPipeline:
    kind = PipelineKind.CSP_LDA
    epoch_len = 256

    def __init__(self, alpha: float = 0.0, n_pairs: int = 3, seed: int = 0):
        self.alpha = alpha
        self.n_pairs = n_pairs
        self.seed = seed

    def fit(self, train: EpochSet) -> "CspLdaPipeline":
        y = train.labels
        S = epoch_scatters(train.data)
        C1 = S[y == Condition.MEDITATION].mean(axis=0)
        C0 = S[y == Condition.REST].mean(axis=0)
        self.bank = fit_csp(C1, C0, self.alpha, self.n_pairs)
        self.lda = fit_lda(log_variance_features(train.data, self.bank), y)
        self.fit_uids = set(train.uids)
        return self

    def predict(self, test: EpochSet) -> np.ndarray:
        return self.lda.classify(log_variance_features(test.data, self.bank))

    @property
    def hyperparams(self) -> dict:
        return {"alpha": self.alpha, "n_pairs": self.n_pairs}


class CspLdaLstmPipeline:
    kind = PipelineKind.CSP_LDA_LSTM
    epoch_len = 256

    def __init__(self, n_pairs: int = 10, alpha: float = 0.0, seed: int = 0, cfg: LstmConfig | None = None):
        self.n_pairs = n_pairs
        self.alpha = alpha
        self.seed = seed
        self.cfg = replace(cfg or LstmConfig(), seed=seed)

    def fit(self, train: EpochSet) -> "CspLdaLstmPipeline":
        self.model = fit_csp_lda_lstm(train, self.n_pairs, self.alpha, self.cfg)
        self.fit_uids = set(train.uids)
        return self

    def predict(self, test: EpochSet) -> np.ndarray:
        return (self.model.predict_proba(test) > 0.5).astype(int)

    @property
    def hyperparams(self) -> dict:
        return {"alpha": self.alpha, "n_pairs": self.n_pairs}


class SvdNnPipeline:
    """Basis and network are fitted on the training fold; 10% of it is held
    out (stratified) for early stopping."""
    kind = PipelineKind.SVD_NN
    epoch_len = 128

    def __init__(self, k: int = 32, seed: int = 0, width: int = DEFAULT_WIDTH,
                 cfg: NnConfig | None = None, early_stop_fraction: float = 0.10):
        self.k = k
        self.seed = seed
        self.width = width
        self.cfg = replace(cfg or NnConfig(), seed=seed)
        self.early_stop_fraction = early_stop_fraction

    def fit(self, train: EpochSet) -> "SvdNnPipeline":
        dm = build_design_matrix(train, self.width)
        basis = fit_basis(dm, self.k)
        X = all_epoch_features(dm, basis)
        y = train.labels
        rng = np.random.default_rng([self.seed, 1])
        keep, held = _stratified_split(y, self.early_stop_fraction, rng)
        val = (X[held], y[held]) if len(held) else None
        model = train_nn(X[keep], y[keep], self.cfg, val=val)
        self.model = SvdNn(basis, model, self.width)
        self.fit_uids = set(train.uids)
        return self

    def predict(self, test: EpochSet) -> np.ndarray:
        return (self.model.predict_proba(test) > 0.5).astype(int)

    @property
    def hyperparams(self) -> dict:
        return {"k": self.k}


def select_k_for_fold(train: EpochSet, val: EpochSet, grid=DEFAULT_K_GRID, width: int = DEFAULT_WIDTH,
                      cfg: NnConfig = NnConfig(), refine: int = 8) -> tuple[int, dict]:
    dtr = build_design_matrix(train, width)
    dva = build_design_matrix(val, width)
    kmax = min(dtr.matrix.shape)
    grid = [k for k in grid if k <= kmax] or [kmax]
    scores: dict = {}
    k = select_k(dtr, dva, grid, cfg, refine=refine, scores=scores)
    return k, scores


def make_pipeline(kind, hyperparams: dict | None = None, seed: int = 0):
    kind = PipelineKind.parse(kind)
    hp = dict(hyperparams or {})
    if kind is PipelineKind.CSP_LDA:
        return CspLdaPipeline(float(hp.get("alpha", 0.0)), int(hp.get("n_pairs", 3)), seed)
    if kind is PipelineKind.CSP_LDA_LSTM:
        return CspLdaLstmPipeline(int(hp.get("n_pairs", 10)), float(hp.get("alpha", 0.0)), seed,
                                  hp.get("lstm_config"))
    return SvdNnPipeline(int(hp.get("k", 32)), seed, int(hp.get("width", DEFAULT_WIDTH)), hp.get("nn_config"))

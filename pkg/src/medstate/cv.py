"""Cross-validation harnesses: 10-fold intra-subject, leave-one-subject-out,
and the CSP-LDA hyperparameter sweep.

Accuracies are in percent; SD is the population SD over folds.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .core import CohortDataset, EpochSet
from .csp import DEFAULT_ALPHAS, DEFAULT_PAIR_COUNTS, epoch_scatters, fit_csp, log_variance_features
from .errors import MedStateError, TooFewEpochs, TooFewSubjects
from .lda import fit_lda
from .pipelines import EPOCH_LEN, PipelineKind, _stratified_split, make_pipeline, select_k_for_fold
from .svdnn import DEFAULT_K_GRID

N_FOLDS = 10
VALIDATION_FRACTION = 0.10


class LeakageError(MedStateError, AssertionError):
    pass


class CvMode(str, Enum):
    INTRA = "IntraSubject10Fold"
    LOSO = "LeaveOneSubjectOut"

    @classmethod
    def parse(cls, value) -> "CvMode":
        if isinstance(value, cls):
            return value
        key = str(value).lower()
        if key in ("intra", "intrasubject10fold", "intra-subject"):
            return cls.INTRA
        if key in ("inter", "loso", "leaveonesubjectout", "inter-subject"):
            return cls.LOSO
        raise ValueError(f"unknown CV mode {value!r}")


@dataclass(frozen=True, eq=False)
class FoldPlan:
    fold_assignments: dict   # epoch uid (intra) or subject id (LOSO) -> fold
    mode: CvMode
    seed: int | None
    n_folds: int
    folds: np.ndarray | None = None  # intra: fold of each epoch, in EpochSet order

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.folds == fold)

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.folds != fold)


def _derive(*keys) -> int:
    return int(np.random.SeedSequence([int(k) for k in keys]).generate_state(1, dtype=np.uint64)[0])


def plan_intra(subject: EpochSet, seed: int = 0, n_folds: int = N_FOLDS) -> FoldPlan:
    """Stratified folds: per class, a seeded permutation dealt round-robin."""
    labels = subject.labels
    for c in (0, 1):
        if np.sum(labels == c) < n_folds:
            raise TooFewEpochs(f"class {c} has {np.sum(labels == c)} epochs, need >= {n_folds}")
    rng = np.random.default_rng(seed)
    folds = np.empty(len(labels), dtype=int)
    offset = 0
    for c in (0, 1):
        idx = rng.permutation(np.flatnonzero(labels == c))
        folds[idx] = (np.arange(len(idx)) + offset) % n_folds
        offset = (offset + len(idx)) % n_folds
    assignments = {uid: int(f) for uid, f in zip(subject.uids, folds)}
    return FoldPlan(assignments, CvMode.INTRA, seed, n_folds, folds)


def plan_loso(cohort: CohortDataset) -> FoldPlan:
    if len(cohort) < 2:
        raise TooFewSubjects(f"leave-one-subject-out needs >= 2 subjects, got {len(cohort)}")
    assignments = {sid: i for i, sid in enumerate(cohort.subject_ids)}
    return FoldPlan(assignments, CvMode.LOSO, None, len(cohort))


def carve_validation(train: EpochSet, fraction: float = VALIDATION_FRACTION, seed: int = 0):
    """Stratified random split of a training fold into (train', validation)."""
    labels = train.labels
    for c in (0, 1):
        if np.sum(labels == c) < 10:
            raise TooFewEpochs(f"class {c} has {np.sum(labels == c)} training epochs, need >= 10")
    keep, held = _stratified_split(labels, fraction, np.random.default_rng(seed))
    return train.subset(keep), train.subset(held)


@dataclass(eq=False)
class CvReport:
    pipeline: str
    mode: str
    band: str | None
    hyperparams: dict
    per_fold_accuracy: list
    fold_subjects: list
    seeds: dict
    audit: dict = field(default_factory=dict)

    @property
    def mean(self) -> float:
        return float(np.mean(self.per_fold_accuracy))

    @property
    def sd(self) -> float:
        return float(np.std(self.per_fold_accuracy))

    def subject_means(self) -> dict:
        out: dict = {}
        for sid, acc in zip(self.fold_subjects, self.per_fold_accuracy):
            out.setdefault(sid, []).append(acc)
        return {sid: float(np.mean(v)) for sid, v in out.items()}

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mean"] = self.mean
        d["sd"] = self.sd
        d["sd_kind"] = "population"
        d["folds"] = [{"subject_id": s, "accuracy": a} for s, a in zip(self.fold_subjects, self.per_fold_accuracy)]
        del d["per_fold_accuracy"], d["fold_subjects"]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CvReport":
        return cls(d["pipeline"], d["mode"], d["band"], d["hyperparams"],
                   [f["accuracy"] for f in d["folds"]], [f["subject_id"] for f in d["folds"]],
                   d["seeds"], d.get("audit", {}))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["subject_id", "fold", "accuracy"])
        counts: dict = {}
        for sid, acc in zip(self.fold_subjects, self.per_fold_accuracy):
            counts[sid] = counts.get(sid, -1) + 1
            w.writerow([sid, counts[sid], repr(float(acc))])
        w.writerow(["__mean__", "", repr(self.mean)])
        w.writerow(["__sd__", "", repr(self.sd)])
        return buf.getvalue()


def parse_report_csv(text: str) -> dict:
    """Inverse of ``CvReport.to_csv``: folds as (subject, fold, accuracy), plus mean and sd."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != ["subject_id", "fold", "accuracy"]:
        raise ValueError("not a report CSV")
    out = {"folds": []}
    for sid, fold, acc in rows[1:]:
        if sid == "__mean__":
            out["mean"] = float(acc)
        elif sid == "__sd__":
            out["sd"] = float(acc)
        else:
            out["folds"].append((sid, int(fold), float(acc)))
    return out


def _accuracy(pred, y) -> float:
    return 100.0 * float(np.mean(np.asarray(pred) == np.asarray(y)))


def _check_leakage(fit_uids, test: EpochSet, where: str) -> None:
    overlap = set(fit_uids) & set(test.uids)
    if overlap:
        raise LeakageError(f"{where}: {len(overlap)} test epochs were used for fitting")


def _folds(cohort: CohortDataset, mode: CvMode, epoch_len: int, plan_seed: int):
    """Yield (subject index, fold index, test subject id, train, test)."""
    sets = [s.epochs(epoch_len) for s in cohort.subjects]
    if mode is CvMode.INTRA:
        for si, (subj, es) in enumerate(zip(cohort.subjects, sets)):
            plan = plan_intra(es, _derive(plan_seed, si))
            for f in range(plan.n_folds):
                yield si, f, subj.subject_id, es.subset(plan.train_indices(f)), es.subset(plan.test_indices(f))
    else:
        plan = plan_loso(cohort)
        for sid, f in plan.fold_assignments.items():
            train = None
            for j, es in enumerate(sets):
                if j != f:
                    train = es if train is None else train + es
            yield f, 0, sid, train, sets[f]


def run_experiment(cohort: CohortDataset, pipeline, hyperparams: dict | None = None, mode="intra",
                   plan_seed: int = 0, train_seed: int = 0, k_grid=DEFAULT_K_GRID, refine: int = 8,
                   progress: Callable[[str], None] | None = None) -> CvReport:
    """Cross-validate one pipeline on a cohort.

    Every fitted component (CSP bank, LDA, SVD basis, networks) sees only
    the fold's training split. For SVD-NN without an explicit ``k``, the
    number of singular vectors is chosen once, on a 10% validation carve of
    the very first round, and reused unchanged in every later round.
    """
    kind = PipelineKind.parse(pipeline)
    mode = CvMode.parse(mode)
    hp = dict(hyperparams or {})
    select = kind is PipelineKind.SVD_NN and "k" not in hp
    accs, subjects, fold_audit = [], [], []
    selection = None
    for si, f, sid, train, test in _folds(cohort, mode, EPOCH_LEN[kind], plan_seed):
        seed = _derive(train_seed, si, f)
        entry = {"subject_id": sid, "fold": f, "n_train": len(train), "n_test": len(test)}
        if select and selection is None:
            train_sel, val = carve_validation(train, VALIDATION_FRACTION, _derive(plan_seed, si, f, 7))
            _check_leakage(set(train_sel.uids) | set(val.uids), test, "k selection")
            k, scores = select_k_for_fold(train_sel, val, k_grid, refine=refine)
            hp["k"] = k
            selection = {"subject_id": sid, "fold": f, "k": k, "n_validation": len(val),
                         "scores": {str(kk): v for kk, v in sorted(scores.items())}}
            entry["k_selected_here"] = True
        pipe = make_pipeline(kind, hp, seed)
        pipe.fit(train)
        _check_leakage(pipe.fit_uids, test, f"subject {sid} fold {f}")
        acc = _accuracy(pipe.predict(test), test.labels)
        entry.update(accuracy=acc, leakage_ok=True)
        if kind is PipelineKind.SVD_NN:
            entry["k"] = pipe.k
        fold_audit.append(entry)
        accs.append(acc)
        subjects.append(sid)
        if progress:
            progress(f"{kind.value} {mode.value} {sid} fold {f}: {acc:.1f}%")
    audit = {"leakage_ok": all(e["leakage_ok"] for e in fold_audit), "folds": fold_audit}
    if selection is not None:
        ks = {e["k"] for e in fold_audit}
        selection["frozen"] = ks == {selection["k"]}
        audit["k_selection"] = selection
    hp_out = {k: v for k, v in hp.items() if k in ("alpha", "n_pairs", "k")}
    if kind is PipelineKind.CSP_LDA:
        hp_out.setdefault("alpha", 0.0)
        hp_out.setdefault("n_pairs", 3)
    elif kind is PipelineKind.CSP_LDA_LSTM:
        hp_out.setdefault("alpha", 0.0)
        hp_out.setdefault("n_pairs", 10)
    band = cohort.band.name.value if cohort.band is not None else None
    return CvReport(kind.value, mode.value, band, hp_out, accs, subjects,
                    {"plan": plan_seed, "train": train_seed, "cohort": cohort.meta.get("seed_cohort")}, audit)


@dataclass(eq=False)
class SweepTable:
    alphas: list
    pair_counts: list
    cells: dict   # (alpha, n_pairs) -> CvReport

    def column_order(self) -> list:
        """Regularized alphas from largest to smallest, classical (0) last."""
        nonzero = sorted((a for a in self.alphas if a != 0), reverse=True)
        return nonzero + ([0.0] if 0.0 in self.alphas else [])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = self.column_order()
        w.writerow(["n_pairs"] + ["classical" if a == 0 else repr(float(a)) for a in cols])
        for n in sorted(self.pair_counts):
            row = [str(n)]
            for a in cols:
                rep = self.cells[(a, n)]
                row.append(f"{rep.mean!r}±{rep.sd!r}")
            w.writerow(row)
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {"alphas": [float(a) for a in self.alphas], "pair_counts": list(self.pair_counts),
                "cells": [self.cells[(a, n)].to_dict() for a in self.column_order() for n in sorted(self.pair_counts)]}

    def best(self, alphas=None) -> float:
        alphas = self.alphas if alphas is None else alphas
        return max(self.cells[(a, n)].mean for a in alphas for n in self.pair_counts)


def parse_sweep_csv(text: str) -> dict:
    """Inverse of ``SweepTable.to_csv``: {(alpha, n_pairs): (mean, sd)}."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0][0] != "n_pairs":
        raise ValueError("not a sweep CSV")
    alphas = [0.0 if h == "classical" else float(h) for h in rows[0][1:]]
    out = {}
    for row in rows[1:]:
        n = int(row[0])
        for a, cell in zip(alphas, row[1:]):
            mean, sd = cell.split("±")
            out[(a, n)] = (float(mean), float(sd))
    return out


def grid_sweep(cohort: CohortDataset, alphas=DEFAULT_ALPHAS, pair_counts=DEFAULT_PAIR_COUNTS,
               mode="intra", plan_seed: int = 0, progress: Callable[[str], None] | None = None) -> SweepTable:
    """CSP-LDA accuracy for every (alpha, n_pairs) cell.

    Per fold and alpha one bank with ``max(pair_counts)`` pairs is fitted;
    smaller cells use its leading filters, which is what a refit with fewer
    pairs returns. Folds match ``run_experiment`` with the same plan seed.
    """
    alphas = [float(a) for a in alphas]
    pair_counts = [int(n) for n in pair_counts]
    if not alphas or not pair_counts:
        raise ValueError("empty hyperparameter grid")
    mode = CvMode.parse(mode)
    nmax = max(pair_counts)
    accs = {(a, n): [] for a in alphas for n in pair_counts}
    subjects, leak_ok = [], True
    for si, f, sid, train, test in _folds(cohort, mode, EPOCH_LEN[PipelineKind.CSP_LDA], plan_seed):
        _check_leakage(train.uids, test, f"subject {sid} fold {f}")
        y, yt = train.labels, test.labels
        S = epoch_scatters(train.data)
        C1, C0 = S[y == 1].mean(axis=0), S[y == 0].mean(axis=0)
        for a in alphas:
            bank = fit_csp(C1, C0, a, nmax)
            Ftr = log_variance_features(train.data, bank)
            Fte = log_variance_features(test.data, bank)
            for n in pair_counts:
                cols = list(range(n)) + list(range(nmax, nmax + n))
                lda = fit_lda(Ftr[:, cols], y)
                accs[(a, n)].append(_accuracy(lda.classify(Fte[:, cols]), yt))
        subjects.append(sid)
        if progress:
            progress(f"sweep {mode.value} {sid} fold {f}")
    band = cohort.band.name.value if cohort.band is not None else None
    cells = {}
    for (a, n), values in accs.items():
        cells[(a, n)] = CvReport(PipelineKind.CSP_LDA.value, mode.value, band, {"alpha": a, "n_pairs": n},
                                 values, list(subjects), {"plan": plan_seed, "train": None,
                                                          "cohort": cohort.meta.get("seed_cohort")},
                                 {"leakage_ok": leak_ok,
                                  "regularization": "classical" if a == 0 else "tikhonov"})
    return SweepTable(alphas, pair_counts, cells)

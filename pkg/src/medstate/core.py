"""Shared domain types: bands, recordings, epochs and cohorts."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import Iterator, Sequence

import numpy as np

from .errors import InvalidParams, TooShort

CANONICAL_FS = 128.0


class Condition(IntEnum):
    REST = 0
    MEDITATION = 1


class BandName(str, Enum):
    ALPHA = "Alpha"
    BETA = "Beta"
    LOW_GAMMA = "LowGamma"
    HIGH_GAMMA = "HighGamma"


@dataclass(frozen=True)
class BandDef:
    name: BandName
    lo_hz: float
    hi_hz: float

    def __post_init__(self):
        if not 0 <= self.lo_hz < self.hi_hz:
            raise InvalidParams(f"band edges must satisfy 0 <= lo < hi, got {self.lo_hz}, {self.hi_hz}")


_BANDS = (
    BandDef(BandName.ALPHA, 8.0, 13.0),
    BandDef(BandName.BETA, 13.0, 25.0),
    BandDef(BandName.LOW_GAMMA, 25.0, 45.0),
    BandDef(BandName.HIGH_GAMMA, 45.0, 64.0),
)


def band_definitions() -> list[BandDef]:
    """The four analysis bands, lowest first."""
    return list(_BANDS)


def get_band(name) -> BandDef:
    """Look a band up by name, case-insensitively (``"beta"``, ``"HighGamma"``...)."""
    if isinstance(name, BandDef):
        return name
    key = str(getattr(name, "value", name)).replace("_", "").replace("-", "").lower()
    for band in _BANDS:
        if band.name.value.lower() == key:
            return band
    raise InvalidParams(f"unknown band {name!r}")


@dataclass(frozen=True, eq=False)
class Recording:
    subject_id: str
    condition: Condition
    sample_rate_hz: float
    data: np.ndarray  # channels x samples

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            raise InvalidParams(f"recording data must be channels x samples, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise InvalidParams("recording contains NaN or Inf")
        if self.sample_rate_hz <= 0:
            raise InvalidParams("sample rate must be positive")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "condition", Condition(self.condition))

    @property
    def n_channels(self) -> int:
        return self.data.shape[0]

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    def with_data(self, data) -> "Recording":
        return Recording(self.subject_id, self.condition, self.sample_rate_hz, data)


@dataclass(frozen=True, eq=False)
class Epoch:
    data: np.ndarray  # channels x L, per-channel mean removed
    label: Condition
    subject_id: str
    parent_index: int

    @property
    def uid(self) -> tuple[str, int, int]:
        """Identifier unique within a cohort, used by the leakage audit."""
        return (self.subject_id, int(self.label), self.parent_index)


def make_epoch(window, label, subject_id, parent_index) -> Epoch:
    window = np.asarray(window, dtype=float)
    data = window - window.mean(axis=1, keepdims=True)
    data[np.ptp(window, axis=1) == 0] = 0.0  # exact zeros for flat channels
    data.setflags(write=False)
    return Epoch(data, Condition(label), subject_id, int(parent_index))


@dataclass(frozen=True, eq=False)
class EpochSet:
    epochs: tuple[Epoch, ...]
    n_channels: int
    epoch_len: int

    def __post_init__(self):
        object.__setattr__(self, "epochs", tuple(self.epochs))
        for ep in self.epochs:
            if ep.data.shape != (self.n_channels, self.epoch_len):
                raise InvalidParams(
                    f"epoch shape {ep.data.shape} differs from set shape {(self.n_channels, self.epoch_len)}")

    @classmethod
    def from_epochs(cls, epochs: Sequence[Epoch]) -> "EpochSet":
        epochs = tuple(epochs)
        if not epochs:
            raise InvalidParams("cannot infer shape of an empty epoch set")
        c, L = epochs[0].data.shape
        return cls(epochs, c, L)

    def __len__(self) -> int:
        return len(self.epochs)

    def __iter__(self) -> Iterator[Epoch]:
        return iter(self.epochs)

    def __getitem__(self, idx):
        return self.epochs[idx]

    def __add__(self, other: "EpochSet") -> "EpochSet":
        return EpochSet(self.epochs + other.epochs, self.n_channels, self.epoch_len)

    def subset(self, indices) -> "EpochSet":
        return EpochSet(tuple(self.epochs[i] for i in indices), self.n_channels, self.epoch_len)

    @property
    def data(self) -> np.ndarray:
        """Stacked epochs, shape (n_epochs, channels, L)."""
        if not self.epochs:
            return np.zeros((0, self.n_channels, self.epoch_len))
        return np.stack([ep.data for ep in self.epochs])

    @property
    def labels(self) -> np.ndarray:
        return np.array([int(ep.label) for ep in self.epochs], dtype=int)

    @property
    def uids(self) -> list[tuple[str, int, int]]:
        return [ep.uid for ep in self.epochs]


def slice_epochs(rec: Recording, epoch_len: int, stride: int | None = None) -> EpochSet:
    """Cut a recording into mean-centred windows, in time order.

    ``stride`` defaults to ``epoch_len`` (non-overlapping windows).
    """
    stride = epoch_len if stride is None else stride
    if epoch_len < 2 or stride < 1:
        raise InvalidParams(f"need epoch_len >= 2 and stride >= 1, got {epoch_len}, {stride}")
    if rec.n_samples < epoch_len:
        raise TooShort(f"recording has {rec.n_samples} samples, epoch needs {epoch_len}")
    n = (rec.n_samples - epoch_len) // stride + 1
    epochs = tuple(
        make_epoch(rec.data[:, i * stride:i * stride + epoch_len], rec.condition, rec.subject_id, i)
        for i in range(n)
    )
    return EpochSet(epochs, rec.n_channels, epoch_len)


@dataclass(frozen=True, eq=False)
class SubjectData:
    subject_id: str
    recordings: tuple[Recording, ...]  # one per condition

    def recording(self, condition) -> Recording:
        for rec in self.recordings:
            if rec.condition == Condition(condition):
                return rec
        raise KeyError(f"subject {self.subject_id} has no {Condition(condition).name} recording")

    def epochs(self, epoch_len: int, stride: int | None = None) -> EpochSet:
        """Both conditions sliced and concatenated (rest first)."""
        sets = [slice_epochs(rec, epoch_len, stride)
                for rec in sorted(self.recordings, key=lambda r: int(r.condition))]
        out = sets[0]
        for s in sets[1:]:
            out = out + s
        return out


@dataclass(frozen=True, eq=False)
class CohortDataset:
    subjects: tuple[SubjectData, ...]
    band: BandDef | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "subjects", tuple(self.subjects))
        ids = [s.subject_id for s in self.subjects]
        if len(set(ids)) != len(ids):
            raise InvalidParams("duplicate subject ids in cohort")

    def __len__(self) -> int:
        return len(self.subjects)

    @property
    def subject_ids(self) -> list[str]:
        return [s.subject_id for s in self.subjects]

    def check_balance(self, epoch_len: int, low: float = 0.8, high: float = 1.25) -> None:
        for subj in self.subjects:
            labels = subj.epochs(epoch_len).labels
            n1, n0 = int(labels.sum()), int((labels == 0).sum())
            if n0 == 0 or not low <= n1 / n0 <= high:
                raise InvalidParams(f"subject {subj.subject_id} is unbalanced ({n1} vs {n0} epochs)")

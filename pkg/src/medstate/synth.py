"""Synthetic EEG cohorts with planted class differences.

``planting="spatial"``: band-limited Gaussian sources are mixed into the
channels by an orthonormal matrix (shared base + per-subject perturbation).
The first ``n_discriminative`` sources have variance ``rho`` during
meditation and 1 at rest, which CSP can recover.

``planting="lowrank"``: every block of ``width / n_channels`` samples is a
random combination of ``n_sources`` fixed spatio-temporal patterns, so the
class difference lives in ``n_sources`` directions of the SVD-NN design
matrix.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import BandDef, CohortDataset, Condition, Recording, SubjectData, get_band
from .dsp import apply_filter, band_filter_spec
from .errors import InvalidParams


@dataclass(frozen=True)
class SynthParams:
    n_subjects: int = 12
    n_channels: int = 24
    fs: float = 128.0
    minutes_per_condition: float = 6.0
    n_sources: int = 8
    n_discriminative: int = 1
    class_variance_ratio: float = 6.0
    subject_jitter: float = 0.1
    noise_power: float = 0.1
    band: BandDef = get_band("HighGamma")
    seed: int = 0
    planting: str = "spatial"
    width: int = 384

    def __post_init__(self):
        object.__setattr__(self, "band", get_band(self.band))
        if self.n_subjects < 1 or self.n_channels < 2 or self.n_sources < 1:
            raise InvalidParams("n_subjects, n_channels and n_sources must be positive")
        if self.fs <= 0 or self.minutes_per_condition <= 0:
            raise InvalidParams("fs and minutes_per_condition must be positive")
        if not 0 <= self.n_discriminative <= self.n_sources:
            raise InvalidParams("n_discriminative must be in [0, n_sources]")
        if self.class_variance_ratio < 1:
            raise InvalidParams("class_variance_ratio must be >= 1")
        if self.subject_jitter < 0 or self.noise_power <= 0:
            raise InvalidParams("subject_jitter must be >= 0 and noise_power > 0")
        if self.planting not in ("spatial", "lowrank"):
            raise InvalidParams(f"unknown planting {self.planting!r}")
        if self.planting == "spatial" and self.n_sources > self.n_channels:
            raise InvalidParams("orthonormal mixing needs n_sources <= n_channels")
        if self.planting == "lowrank":
            if self.width % self.n_channels:
                raise InvalidParams(f"width {self.width} must be a multiple of n_channels {self.n_channels}")
            if self.n_sources > self.width:
                raise InvalidParams("n_sources exceeds the design-matrix width")

    @property
    def n_samples(self) -> int:
        return int(round(self.minutes_per_condition * 60 * self.fs))

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["band"] = self.band.name.value
        return d


def _orthonormal(M: np.ndarray) -> np.ndarray:
    Q, R = np.linalg.qr(M)
    return Q * np.where(np.diag(R) < 0, -1.0, 1.0)


def base_mixing(params: SynthParams) -> np.ndarray:
    """Mixing (spatial) or pattern (lowrank) basis shared by every subject."""
    rng = np.random.default_rng([params.seed, 0x5EED])
    dim = params.n_channels if params.planting == "spatial" else params.width
    return _orthonormal(rng.standard_normal((dim, params.n_sources)))


def subject_mixing(params: SynthParams, rng) -> np.ndarray:
    A0 = base_mixing(params)
    return _orthonormal(A0 + params.subject_jitter * rng.standard_normal(A0.shape))


def _band_noise(rng, shape, params: SynthParams) -> np.ndarray:
    """Unit-variance Gaussian noise limited to the cohort band."""
    x = rng.standard_normal(shape)
    y = apply_filter(x, band_filter_spec(params.band, params.fs), params.fs)
    return y / y.std(axis=-1, keepdims=True)


def _spatial(params: SynthParams, A, rng, condition) -> np.ndarray:
    n = params.n_samples
    S = _band_noise(rng, (params.n_sources, n), params)
    if condition == Condition.MEDITATION:
        S[:params.n_discriminative] *= np.sqrt(params.class_variance_ratio)
    noise = np.sqrt(params.noise_power) * _band_noise(rng, (params.n_channels, n), params)
    return A @ S + noise


def _lowrank(params: SynthParams, P, rng, condition) -> np.ndarray:
    c = params.n_channels
    block = params.width // c
    n_blocks = params.n_samples // block
    var = np.ones(params.n_sources)
    if condition == Condition.MEDITATION:
        var[:params.n_discriminative] = params.class_variance_ratio
    coeffs = rng.standard_normal((n_blocks, params.n_sources)) * np.sqrt(var)
    rows = coeffs @ P.T + np.sqrt(params.noise_power) * rng.standard_normal((n_blocks, params.width))
    # a row holds `block` consecutive samples, channels fastest
    data = rows.reshape(n_blocks * block, c).T
    out = np.zeros((c, params.n_samples))
    out[:, :data.shape[1]] = data
    return out


def generate_subject(params: SynthParams, subject_seed, subject_id: str = "S00") -> tuple[Recording, Recording]:
    """(meditation, rest) recordings of one subject, deterministic in the seed."""
    rng = np.random.default_rng(subject_seed)
    A = subject_mixing(params, rng)
    make = _spatial if params.planting == "spatial" else _lowrank
    recs = []
    for cond in (Condition.MEDITATION, Condition.REST):
        recs.append(Recording(subject_id, cond, params.fs, make(params, A, rng, cond)))
    return recs[0], recs[1]


def subject_seeds(params: SynthParams) -> list[int]:
    children = np.random.SeedSequence(params.seed).spawn(params.n_subjects)
    return [int(ch.generate_state(1, dtype=np.uint64)[0]) for ch in children]


def generate_cohort(params: SynthParams) -> CohortDataset:
    if params.n_subjects < 2:
        raise InvalidParams("a cohort needs at least 2 subjects")
    subjects = []
    for i, seed in enumerate(subject_seeds(params)):
        sid = f"S{i + 1:02d}"
        med, rest = generate_subject(params, seed, sid)
        subjects.append(SubjectData(sid, (med, rest)))
    return CohortDataset(tuple(subjects), params.band, {"synth": params.to_dict()})


def with_params(params: SynthParams, **changes) -> SynthParams:
    return replace(params, **changes)

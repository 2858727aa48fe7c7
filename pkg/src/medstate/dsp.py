"""Zero-phase Butterworth band-pass and notch filtering."""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import signal

from .core import BandDef, Recording
from .errors import EdgeAboveNyquist, InvalidParams

DEFAULT_ORDER = 4
DEFAULT_NOTCH_HZ = 50.0


class FilterKind(str, Enum):
    BAND_PASS = "bandpass"
    HIGH_PASS = "highpass"
    NOTCH = "notch"


@dataclass(frozen=True)
class FilterSpec:
    kind: FilterKind
    edges_hz: tuple[float, ...]
    order: int = DEFAULT_ORDER
    zero_phase: bool = True
    q: float | None = None

    def sos(self, fs: float) -> np.ndarray:
        nyq = fs / 2.0
        for e in self.edges_hz:
            if e > nyq:
                raise EdgeAboveNyquist(f"edge {e} Hz exceeds Nyquist {nyq} Hz")
            if e <= 0:
                raise InvalidParams(f"filter edge must be positive, got {e}")
        if any(b <= a for a, b in zip(self.edges_hz, self.edges_hz[1:])):
            raise InvalidParams("filter edges must be strictly increasing")
        if self.kind is not FilterKind.NOTCH and (self.order < 2 or self.order % 2):
            raise InvalidParams(f"filter order must be a positive even number, got {self.order}")
        if self.kind is FilterKind.NOTCH:
            (f0,) = self.edges_hz
            if f0 >= nyq:
                raise EdgeAboveNyquist(f"notch frequency {f0} Hz must be below Nyquist {nyq} Hz")
            b, a = signal.iirnotch(f0, self.q, fs=fs)
            return signal.tf2sos(b, a)
        if self.kind is FilterKind.HIGH_PASS:
            return signal.butter(self.order, self.edges_hz[0], btype="highpass", fs=fs, output="sos")
        return signal.butter(self.order, self.edges_hz, btype="bandpass", fs=fs, output="sos")


def band_filter_spec(band: BandDef, fs: float, order: int = DEFAULT_ORDER) -> FilterSpec:
    """Band-pass spec for ``band``; an upper edge at Nyquist becomes a high-pass."""
    nyq = fs / 2.0
    if band.hi_hz > nyq:
        raise EdgeAboveNyquist(f"band {band.name.value} upper edge {band.hi_hz} Hz exceeds Nyquist {nyq} Hz")
    if band.hi_hz == nyq:
        return FilterSpec(FilterKind.HIGH_PASS, (band.lo_hz,), order)
    return FilterSpec(FilterKind.BAND_PASS, (band.lo_hz, band.hi_hz), order)


def apply_filter(x, spec: FilterSpec, fs: float) -> np.ndarray:
    """Filter along the last axis.

    Zero-phase specs run forward-backward after odd-reflection padding of
    three times the IIR order at each end; the padding is trimmed
    afterwards.
    """
    x = np.asarray(x, dtype=float)
    sos = spec.sos(fs)
    if not spec.zero_phase:
        return signal.sosfilt(sos, x, axis=-1)
    iir_order = 2 * sos.shape[0]
    pad = min(3 * iir_order, x.shape[-1] - 1)
    if pad <= 0:
        return signal.sosfiltfilt(sos, x, axis=-1, padtype=None)
    return signal.sosfiltfilt(sos, x, axis=-1, padtype="odd", padlen=pad)


def bandpass(rec: Recording, band: BandDef, order: int = DEFAULT_ORDER) -> Recording:
    spec = band_filter_spec(band, rec.sample_rate_hz, order)
    return rec.with_data(apply_filter(rec.data, spec, rec.sample_rate_hz))


def notch(rec: Recording, f0_hz: float = DEFAULT_NOTCH_HZ, q: float = 30.0) -> Recording:
    if q <= 0:
        raise InvalidParams("notch quality factor must be positive")
    if not 0 < f0_hz < rec.sample_rate_hz / 2:
        raise EdgeAboveNyquist(f"notch frequency {f0_hz} Hz outside (0, {rec.sample_rate_hz / 2}) Hz")
    spec = FilterSpec(FilterKind.NOTCH, (f0_hz,), q=q)
    return rec.with_data(apply_filter(rec.data, spec, rec.sample_rate_hz))

import numpy as np
import pytest
from scipy import signal

from medstate.core import get_band
from medstate.dsp import FilterKind, FilterSpec, apply_filter, band_filter_spec, bandpass, notch
from medstate.errors import EdgeAboveNyquist, InvalidParams

from conftest import make_recording, tone

FS = 128.0


def rms(x):
    return float(np.sqrt(np.mean(np.square(x))))


def test_alpha_passes_10hz():
    x = tone(10.0)
    y = bandpass(make_recording(x), get_band("Alpha")).data
    assert 0.89 <= rms(y) / rms(x) <= 1.12


def test_low_gamma_blocks_10hz():
    x = tone(10.0)
    y = bandpass(make_recording(x), get_band("LowGamma")).data
    assert rms(y) / rms(x) <= 0.03


def test_zero_in_zero_out():
    for band in ("Alpha", "HighGamma"):
        assert not bandpass(make_recording(np.zeros((3, 512))), get_band(band)).data.any()
    assert not notch(make_recording(np.zeros((3, 512)))).data.any()


def test_output_length_and_metadata():
    rec = make_recording(np.random.default_rng(0).standard_normal((4, 777)))
    out = bandpass(rec, get_band("Beta"))
    assert out.data.shape == rec.data.shape
    assert (out.subject_id, out.condition, out.sample_rate_hz) == (rec.subject_id, rec.condition, rec.sample_rate_hz)


@pytest.mark.parametrize("name", ["Alpha", "Beta", "LowGamma", "HighGamma"])
def test_passband_center_gain(name):
    band = get_band(name)
    sos = band_filter_spec(band, FS).sos(FS)
    center = np.sqrt(band.lo_hz * min(band.hi_hz, 60.0))
    _, h = signal.sosfreqz(sos, worN=[center], fs=FS)
    gain_db = 20 * np.log10(np.abs(h[0]) ** 2)  # forward-backward squares the response
    assert abs(gain_db) <= 1.0


@pytest.mark.parametrize("name", ["Alpha", "Beta", "LowGamma", "HighGamma"])
def test_octave_outside_attenuation(name):
    # steady-state response of the forward-backward filter, 30 dB one octave out
    band = get_band(name)
    sos = band_filter_spec(band, FS).sos(FS)
    freqs = [band.lo_hz / 2]
    if band.hi_hz * 2 < FS / 2:
        freqs.append(band.hi_hz * 2)
    _, h = signal.sosfreqz(sos, worN=freqs, fs=FS)
    assert np.all(20 * np.log10(np.abs(h) ** 2) <= -30)


@pytest.mark.parametrize("phase", [0.0, 0.7, 1.9])
def test_notch_removes_50hz(phase):
    x = tone(50.0, seconds=10.0, phase=phase)
    y = notch(make_recording(x), 50.0, 30.0).data
    assert rms(y) <= 0.1 * rms(x)


def test_notch_response():
    sos = FilterSpec(FilterKind.NOTCH, (50.0,), q=30.0).sos(FS)
    _, h = signal.sosfreqz(sos, worN=[45.0, 50.0, 55.0], fs=FS)
    db = 20 * np.log10(np.abs(h) ** 2 + 1e-300)
    assert db[1] <= -20
    assert abs(db[0]) <= 1.5 and abs(db[2]) <= 1.5


def test_notch_passes_dc():
    x = np.full((2, 1024), 2.5)
    y = notch(make_recording(x)).data
    assert np.allclose(y, x, rtol=1e-6)


def test_linearity(rng):
    x, y = rng.standard_normal((2, 3, 600))
    spec = band_filter_spec(get_band("Beta"), FS)
    a, b = 2.5, -0.75
    lhs = apply_filter(a * x + b * y, spec, FS)
    rhs = a * apply_filter(x, spec, FS) + b * apply_filter(y, spec, FS)
    assert np.linalg.norm(lhs - rhs) <= 1e-9 * np.linalg.norm(rhs)


@pytest.mark.parametrize("name, freq", [("Alpha", 10.0), ("Beta", 19.0), ("LowGamma", 35.0), ("HighGamma", 55.0)])
def test_zero_phase(name, freq):
    x = tone(freq, seconds=8.0)[0]
    y = bandpass(make_recording(x), get_band(name)).data[0]
    mid = slice(128, -128)
    xc = signal.correlate(y[mid], x[mid], mode="full")
    lag = np.argmax(xc) - (len(x[mid]) - 1)
    assert lag == 0


def test_high_gamma_is_highpass():
    spec = band_filter_spec(get_band("HighGamma"), FS)
    assert spec.kind is FilterKind.HIGH_PASS
    assert spec.edges_hz == (45.0,)


def test_edge_above_nyquist():
    with pytest.raises(EdgeAboveNyquist):
        band_filter_spec(get_band("HighGamma"), 100.0).sos(100.0)
    with pytest.raises(EdgeAboveNyquist):
        notch(make_recording(np.zeros((1, 512))), 70.0)


def test_bad_specs():
    with pytest.raises(InvalidParams):
        FilterSpec(FilterKind.BAND_PASS, (20.0, 10.0)).sos(FS)
    with pytest.raises(InvalidParams):
        FilterSpec(FilterKind.BAND_PASS, (5.0, 10.0), order=3).sos(FS)

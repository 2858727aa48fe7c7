import numpy as np
import pytest

from medstate.core import Condition, Recording


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def tone(freq, seconds=4.0, fs=128.0, phase=0.0, channels=1):
    t = np.arange(int(seconds * fs)) / fs
    return np.tile(np.sin(2 * np.pi * freq * t + phase), (channels, 1))


def make_recording(data, condition=Condition.REST, subject="S01", fs=128.0):
    return Recording(subject, condition, fs, np.atleast_2d(data))

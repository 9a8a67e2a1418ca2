import numpy as np
import pytest


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)


def sine(freq: float, duration: float, rate: float, amp: float = 0.5) -> np.ndarray:
    t = np.arange(int(duration * rate)) / rate
    return amp * np.sin(2.0 * np.pi * freq * t)


def exponential_chirp(
    nu_start: float, slope: float, duration: float, rate: float, amp: float = 0.5
) -> np.ndarray:
    """Sweep at a constant rate in semitones per second."""
    from tonescale.spectrogram import frequency_from_midi

    t = np.arange(int(duration * rate)) / rate
    freq = frequency_from_midi(nu_start + slope * t)
    phase = 2.0 * np.pi * np.cumsum(freq) / rate
    return amp * np.sin(phase)

"""
Band-amplitude features over the event vocabulary's frequency bands
"""

from typing import List

import numpy as np
from scipy.fft import rfft
from scipy.signal import get_window

from models.events import DEFAULT_EVENT_CLASSES, EventClass
from utils.errors import DimensionError

N_FFT = 400
HOP = 200


def stft_frames(waveform, n_fft: int = N_FFT, hop: int = HOP) -> np.ndarray:
    """Centered Hann-windowed spectra, one row per hop; frame j is centered on sample j * hop"""
    waveform = np.asarray(waveform, dtype=np.float64).reshape(-1)
    if waveform.size == 0:
        raise DimensionError("Cannot analyse an empty waveform")
    padded = np.pad(waveform, (n_fft // 2, n_fft // 2))
    count = 1 + waveform.size // hop
    frames = np.lib.stride_tricks.sliding_window_view(padded, n_fft)[::hop][:count]
    return rfft(frames * get_window('hann', n_fft), axis=1)


def band_amplitudes(waveform, sample_rate: int = 4000, classes: List[EventClass] = None,
                    n_fft: int = N_FFT, hop: int = HOP) -> np.ndarray:
    """(frames, classes) amplitude of each class band; a unit sinusoid inside a band reads 1"""
    classes = classes or DEFAULT_EVENT_CLASSES
    spectra = stft_frames(waveform, n_fft, hop)
    power = np.abs(spectra) ** 2
    freqs = np.arange(power.shape[1]) * sample_rate / n_fft
    window_energy = float(np.sum(get_window('hann', n_fft) ** 2))
    out = np.zeros((power.shape[0], len(classes)))
    for index, event_class in enumerate(classes):
        low, high = event_class.band
        in_band = (freqs >= low) & (freqs <= high)
        out[:, index] = np.sqrt(4.0 * power[:, in_band].sum(axis=1) / (n_fft * window_energy))
    return out


def band_features(waveform, sample_rate: int = 4000, classes: List[EventClass] = None) -> np.ndarray:
    """Per-band mean and standard deviation of the amplitude envelope"""
    amplitudes = band_amplitudes(waveform, sample_rate, classes)
    return np.concatenate([amplitudes.mean(axis=0), amplitudes.std(axis=0)])


def window_features(waveform, sample_rate: int = 4000, window_s: float = 10.0, hop_s: float = 5.0,
                    classes: List[EventClass] = None) -> np.ndarray:
    """Features of every full window_s window, stepping hop_s"""
    waveform = np.asarray(waveform, dtype=np.float64).reshape(-1)
    size = int(round(window_s * sample_rate))
    step = int(round(hop_s * sample_rate))
    if size <= 0 or step <= 0:
        raise DimensionError("Window and hop must be positive")
    starts = range(0, waveform.size - size + 1, step)
    rows = [band_features(waveform[s:s + size], sample_rate, classes) for s in starts]
    if not rows:
        return np.zeros((0, 2 * len(classes or DEFAULT_EVENT_CLASSES)))
    return np.stack(rows)


def clip_features(waveform, sample_rate: int = 4000, crop_s: float = 10.0, fusion: bool = True,
                  classes: List[EventClass] = None) -> np.ndarray:
    """Clip embedding; long clips average the start, middle and end crops when fusion is on"""
    waveform = np.asarray(waveform, dtype=np.float64).reshape(-1)
    size = int(round(crop_s * sample_rate))
    if not fusion or waveform.size <= size:
        return band_features(waveform, sample_rate, classes)
    middle = (waveform.size - size) // 2
    crops = [waveform[:size], waveform[middle:middle + size], waveform[-size:]]
    return np.mean([band_features(c, sample_rate, classes) for c in crops], axis=0)

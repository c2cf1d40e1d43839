"""
Grayscale log-magnitude spectrogram images (portable graymap)
"""

from pathlib import Path

import numpy as np
from PIL import Image
from scipy.signal import get_window

from evaluation.features import HOP, N_FFT, stft_frames
from utils.errors import DimensionError

DB_FLOOR = -100.0


def spectrogram_pixels(waveform, n_fft: int = N_FFT, hop: int = HOP) -> np.ndarray:
    """uint8 image, low frequencies at the bottom; a unit sinusoid reads 0 dB (white), silence black"""
    waveform = np.asarray(waveform, dtype=np.float64).reshape(-1)
    if waveform.size == 0:
        raise DimensionError("Cannot render an empty waveform")
    amplitude = np.abs(stft_frames(waveform, n_fft, hop)) * 2.0 / np.sum(get_window('hann', n_fft))
    db = 20.0 * np.log10(np.maximum(amplitude, 10.0 ** (DB_FLOOR / 20.0)))
    scaled = (np.clip(db, DB_FLOOR, 0.0) - DB_FLOOR) / -DB_FLOOR
    return np.flipud(np.round(scaled * 255.0).astype(np.uint8).T)


def render_spectrogram(waveform, path, n_fft: int = N_FFT, hop: int = HOP) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(spectrogram_pixels(waveform, n_fft, hop)).save(path, format='PPM')
    return path

"""
16-bit PCM mono WAV I/O
"""

from pathlib import Path

import numpy as np
import soundfile as sf

from utils.errors import DimensionError


def write_wav(path, waveform, sample_rate: int) -> Path:
    """Write a mono waveform in [-1, 1] as 16-bit PCM (values outside are clipped)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.clip(np.asarray(waveform, dtype=np.float64).reshape(-1), -1.0, 1.0)
    sf.write(str(path), data, int(sample_rate), subtype='PCM_16', format='WAV')
    return path


def read_wav(path, sample_rate: int = None) -> np.ndarray:
    """Read a mono WAV as float64; raises DimensionError on a rate or channel mismatch"""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"WAV file not found: {path}")
    data, rate = sf.read(str(path), dtype='float64', always_2d=True)
    if data.shape[1] != 1:
        raise DimensionError(f"{path} has {data.shape[1]} channels; only mono is supported")
    if sample_rate is not None and rate != sample_rate:
        raise DimensionError(f"{path} is sampled at {rate} Hz, expected {sample_rate} Hz")
    return data[:, 0]

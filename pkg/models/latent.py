"""
Latent model: a channels x frames array tagged with its frame rate
"""

import numpy as np

from utils.errors import DimensionError, NumericalError


class Latent:
    def __init__(self, data, frame_rate: float):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2:
            raise DimensionError(f"Latent data must be channels x frames, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise NumericalError("Latent contains non-finite values")
        self.data = data
        self.frame_rate = float(frame_rate)

    @property
    def channels(self):
        return self.data.shape[0]

    @property
    def frames(self):
        return self.data.shape[1]

    def duration(self):
        """Duration in seconds covered by the frames"""
        return self.frames / self.frame_rate

    def prefix(self, frames):
        """Latent holding only the first `frames` frames"""
        return Latent(self.data[:, :frames], self.frame_rate)

    def __eq__(self, other):
        return (isinstance(other, Latent) and self.frame_rate == other.frame_rate
                and np.array_equal(self.data, other.data))

    def __str__(self):
        return f"Latent[{self.channels}ch x {self.frames}f @ {self.frame_rate:g} f/s]"

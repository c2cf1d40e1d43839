"""
Fixed invertible block codec.

Waveforms are cut into non-overlapping frames of R samples and each frame is
mapped through the orthonormal DCT-II basis, so frame f of the latent holds the
R transform coefficients of samples [f*R, (f+1)*R). The model works on a
16-channel view holding only the bins that carry the event bands.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.fft import dct

from models.events import model_bins
from models.latent import Latent
from utils.errors import ConfigError, DimensionError, NumericalError


@dataclass
class CodecConfig:
    sample_rate: int = 4000
    frame_size: int = 160
    channels: int = None
    transform_id: str = 'dct-ii-ortho'
    latent_scale: float = 0.5
    model_bins: tuple = field(default_factory=model_bins)

    def __post_init__(self):
        if self.channels is None:
            self.channels = self.frame_size
        if self.sample_rate <= 0 or self.frame_size <= 0:
            raise ConfigError("Codec sample rate and frame size must be positive")
        if self.channels != self.frame_size:
            raise ConfigError("The block codec is lossless only with channels == frame_size")
        if self.transform_id != 'dct-ii-ortho':
            raise ConfigError(f"Unknown transform '{self.transform_id}'")
        if any(b < 0 or b >= self.frame_size for b in self.model_bins):
            raise ConfigError(f"Model bins {self.model_bins} outside [0, {self.frame_size})")

    @property
    def frame_rate(self):
        return self.sample_rate / self.frame_size

    @property
    def model_channels(self):
        return len(self.model_bins)

    @property
    def bin_spacing_hz(self):
        return self.sample_rate / (2.0 * self.frame_size)


class BlockCodec:
    """Orthonormal block transform between waveforms and latents"""

    def __init__(self, config: CodecConfig = None):
        self.config = config or CodecConfig()
        # Row k of the basis is the k-th orthonormal DCT-II analysis vector
        self.basis = dct(np.eye(self.config.frame_size), type=2, norm='ortho', axis=0)
        gram = self.basis @ self.basis.T
        if np.max(np.abs(gram - np.eye(self.config.frame_size))) > 1e-9:
            raise NumericalError("Codec transform is not orthonormal")
        self.bins = np.asarray(self.config.model_bins, dtype=np.int64)

    @property
    def frame_rate(self):
        return self.config.frame_rate

    def frames_for(self, num_samples: int) -> int:
        return -(-int(num_samples) // self.config.frame_size)

    def encode(self, waveform) -> Latent:
        """Waveform -> latent (channels x frames); zero-pads to a frame multiple"""
        waveform = np.asarray(waveform, dtype=np.float64).reshape(-1)
        if waveform.size == 0:
            raise DimensionError("Cannot encode an empty waveform")
        R = self.config.frame_size
        frames = self.frames_for(waveform.size)
        padded = np.zeros(frames * R)
        padded[:waveform.size] = waveform
        blocks = padded.reshape(frames, R)
        coefficients = blocks @ self.basis.T
        return Latent(coefficients.T, self.frame_rate)

    def decode(self, latent: Latent, num_samples: int = None) -> np.ndarray:
        """Latent -> waveform, trimmed to num_samples when given"""
        if latent.channels != self.config.channels:
            raise DimensionError(f"Latent has {latent.channels} channels, codec expects {self.config.channels}")
        blocks = latent.data.T @ self.basis
        waveform = blocks.reshape(-1)
        if num_samples is not None:
            if num_samples > waveform.size:
                raise DimensionError(f"Latent holds {waveform.size} samples, {num_samples} requested")
            waveform = waveform[:num_samples]
        return waveform

    def to_model_space(self, latent: Latent) -> np.ndarray:
        """Full latent -> (frames, model_channels) array scaled by latent_scale"""
        return (latent.data[self.bins, :] * self.config.latent_scale).T.copy()

    def from_model_space(self, array) -> Latent:
        """(frames, model_channels) array -> full latent, zero outside the model bins"""
        array = np.asarray(array, dtype=np.float64)
        if array.ndim != 2 or array.shape[1] != self.bins.size:
            raise DimensionError(f"Model-space latent must be frames x {self.bins.size}, got {array.shape}")
        data = np.zeros((self.config.channels, array.shape[0]))
        data[self.bins, :] = array.T / self.config.latent_scale
        return Latent(data, self.frame_rate)

    def encode_model(self, waveform) -> np.ndarray:
        return self.to_model_space(self.encode(waveform))

    def decode_model(self, array, num_samples: int = None) -> np.ndarray:
        return self.decode(self.from_model_space(array), num_samples)

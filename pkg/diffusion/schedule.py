"""
DDPM noise schedule (linear betas)
"""

import numpy as np

from utils.errors import ConfigError


class NoiseSchedule:
    def __init__(self, steps: int = 1000, beta_start: float = 1e-4, beta_end: float = 0.02):
        if steps <= 1:
            raise ConfigError("Noise schedule needs at least 2 steps")
        if not 0 < beta_start < beta_end < 1:
            raise ConfigError("Need 0 < beta_start < beta_end < 1")
        self.steps = steps
        self.betas = np.linspace(beta_start, beta_end, steps, dtype=np.float64)
        self.alphas = 1.0 - self.betas
        self.alphas_cumprod = np.cumprod(self.alphas)

    def q_sample(self, x0, t, noise):
        """Closed-form forward process x_t = sqrt(ab_t) x0 + sqrt(1 - ab_t) eps"""
        ab = self._gather(t, np.ndim(x0))
        return np.sqrt(ab) * x0 + np.sqrt(1.0 - ab) * noise

    def predict_x0(self, x_t, t, eps):
        ab = self._gather(t, np.ndim(x_t))
        return (x_t - np.sqrt(1.0 - ab) * eps) / np.sqrt(ab)

    def predict_eps(self, x_t, t, x0):
        ab = self._gather(t, np.ndim(x_t))
        return (x_t - np.sqrt(ab) * x0) / np.sqrt(1.0 - ab)

    def ddim_timesteps(self, inference_steps: int) -> np.ndarray:
        """Descending timesteps round(linspace(T-1, 0, S))"""
        if not 1 <= inference_steps <= self.steps:
            raise ConfigError(f"Inference steps must be in [1, {self.steps}], got {inference_steps}")
        return np.round(np.linspace(self.steps - 1, 0, inference_steps)).astype(np.int64)

    def _gather(self, t, ndim):
        ab = self.alphas_cumprod[np.asarray(t, dtype=np.int64)]
        if np.ndim(ab) == 0:
            return ab
        return ab.reshape(ab.shape + (1,) * (ndim - ab.ndim))

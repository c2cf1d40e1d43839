"""
Deterministic DDIM sampler with classifier-free guidance.

At every step the sampler predicts the clean batch, hands it to the step
callback (the synchronization point where long-form composition runs) and
continues from whatever the callback returns. Attention hooks registered on
sampler.hooks are passed to every model forward.
"""

from dataclasses import dataclass
from typing import Callable, List, Optional, Protocol

import numpy as np

from diffusion.schedule import NoiseSchedule
from dit.hooks import HookSet
from numerics.kernels import check_finite
from numerics.rng import SeededRng
from utils.errors import ConfigError, DimensionError


class Denoiser(Protocol):
    def predict_noise(self, latents, timestep, text_conditions, durations, hooks=None, pass_name='cond'):
        ...


@dataclass
class SamplerConfig:
    steps: int = 50
    seed: int = 0
    guidance_scale: float = 3.0
    step_callback: Optional[Callable] = None

    def __post_init__(self):
        if self.steps <= 0:
            raise ConfigError("Sampler needs at least one step")
        if self.guidance_scale < 0:
            raise ConfigError("Guidance scale must be non-negative")


class DdimSampler:
    def __init__(self, schedule: NoiseSchedule = None, config: SamplerConfig = None, logger=None):
        self.schedule = schedule or NoiseSchedule()
        self.config = config or SamplerConfig()
        self.logger = logger
        self.hooks = HookSet()
        if self.config.steps > self.schedule.steps:
            raise ConfigError(f"{self.config.steps} inference steps exceed {self.schedule.steps} training steps")

    def initial_noise(self, shape, seed: int = None) -> np.ndarray:
        seed = self.config.seed if seed is None else seed
        return SeededRng(seed).spawn('initial-noise').normal(shape)

    def guided_noise(self, model: Denoiser, x, t, text_conditions, durations, null_conditions=None):
        """eps_u + s (eps_c - eps_u); a scale of 1 runs the conditional branch only"""
        hooks = self.hooks if len(self.hooks) else None
        eps_c = model.predict_noise(x, t, text_conditions, durations, hooks=hooks, pass_name='cond')
        scale = self.config.guidance_scale
        if scale == 1.0 or null_conditions is None:
            return eps_c
        eps_u = model.predict_noise(x, t, null_conditions, durations, hooks=hooks, pass_name='uncond')
        return eps_u + scale * (eps_c - eps_u)

    def sample(self, model: Denoiser, text_conditions: List, durations, num_frames: int = None,
               initial_noise=None, step_callback: Callable = None) -> np.ndarray:
        """Run DDIM from noise to a clean (batch, frames, channels) latent batch"""
        batch = len(text_conditions)
        if len(durations) != batch:
            raise DimensionError("Need one duration per text condition")
        if initial_noise is None:
            frames = num_frames or model.config.max_frames
            initial_noise = self.initial_noise((batch, frames, model.config.in_channels))
        x = np.array(initial_noise, dtype=np.float64)
        if x.shape[0] != batch:
            raise DimensionError(f"Initial noise has batch {x.shape[0]}, expected {batch}")

        callback = step_callback or self.config.step_callback
        null_conditions = None
        if self.config.guidance_scale != 1.0 and hasattr(model, 'null_condition'):
            null = model.null_condition()
            null_conditions = [null] * batch

        schedule = self.schedule
        timesteps = schedule.ddim_timesteps(self.config.steps)
        x0 = x
        for i, t in enumerate(timesteps):
            eps = self.guided_noise(model, x, int(t), text_conditions, durations, null_conditions)
            x0 = schedule.predict_x0(x, int(t), eps)
            if callback is not None:
                x0 = np.asarray(callback(x0, i, int(t)), dtype=np.float64)
            check_finite(x0, f'predicted latents at step {i}')
            if self.logger:
                self.logger.log_sampling_progress(i, len(timesteps), int(t))
            if i == len(timesteps) - 1:
                break
            ab_prev = schedule.alphas_cumprod[int(timesteps[i + 1])]
            x = np.sqrt(ab_prev) * x0 + np.sqrt(1.0 - ab_prev) * eps
        return x0

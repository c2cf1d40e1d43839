"""
Configuration module for FreeAudio settings
Environment-driven configuration for planning, sampling, control and long-form generation
"""

import os
from enum import Enum
from dotenv import load_dotenv

from utils.errors import ConfigError

load_dotenv()

API_KEY_ENV = 'FREEAUDIO_LLM_API_KEY'


class PlanMode(Enum):
    TEMPLATE = "template"
    LLM = "llm"


class FreeAudioConfig:
    """Environment-backed configuration shared by the CLI and the library components"""

    def __init__(self):
        # Codec geometry
        self.sample_rate = int(os.getenv('FREEAUDIO_SAMPLE_RATE', 4000))
        self.frame_size = int(os.getenv('FREEAUDIO_FRAME_SIZE', 160))
        self.max_seconds = float(os.getenv('FREEAUDIO_MAX_SECONDS', 10.0))
        self.latent_scale = float(os.getenv('FREEAUDIO_LATENT_SCALE', 0.5))

        # Planning
        self.plan_mode = PlanMode(os.getenv('FREEAUDIO_PLAN_MODE', 'template').lower())

        # Attention control (cross fusion alpha, self fusion beta)
        self.alpha = float(os.getenv('FREEAUDIO_ALPHA', 0.2))
        self.beta = float(os.getenv('FREEAUDIO_BETA', 0.8))
        self.beta_semantics = os.getenv('FREEAUDIO_BETA_SEMANTICS', 'timing').lower()

        # Long-form generation
        self.lambda_ = float(os.getenv('FREEAUDIO_LAMBDA', 0.2))
        self.overlap_seconds = float(os.getenv('FREEAUDIO_OVERLAP_SECONDS', 2.0))

        # Sampling
        self.steps = int(os.getenv('FREEAUDIO_STEPS', 50))
        self.train_timesteps = int(os.getenv('FREEAUDIO_TRAIN_TIMESTEPS', 1000))
        self.guidance_scale = float(os.getenv('FREEAUDIO_GUIDANCE_SCALE', 3.0))
        self.seed = int(os.getenv('FREEAUDIO_SEED', 0))

        # LLM endpoint (the key itself is only ever read from API_KEY_ENV)
        self.llm_base_url = os.getenv('FREEAUDIO_LLM_BASE_URL', 'http://localhost:8000/v1')
        self.llm_model = os.getenv('FREEAUDIO_LLM_MODEL', 'gpt-4o')
        self.llm_timeout = float(os.getenv('FREEAUDIO_LLM_TIMEOUT', 30.0))
        self.llm_max_retries = int(os.getenv('FREEAUDIO_LLM_MAX_RETRIES', 2))

        # Logging settings
        self.log_level = os.getenv('LOG_LEVEL', 'INFO').upper()
        self.log_to_file = os.getenv('LOG_TO_FILE', 'true').lower() == 'true'
        self.log_dir = os.getenv('LOG_DIR', 'logs')

    @property
    def frame_rate(self) -> float:
        """Latent frames per second"""
        return self.sample_rate / self.frame_size

    @property
    def max_frames(self) -> int:
        """Latent frames in a full-length (M_max) clip"""
        return int(round(self.max_seconds * self.frame_rate))

    def is_llm_mode(self):
        """Check if recaption/gap filling goes through the LLM client"""
        return self.plan_mode == PlanMode.LLM

    def with_overrides(self, **overrides):
        """Apply CLI flag values on top of the environment values (None means not given)"""
        for key, value in overrides.items():
            if value is None:
                continue
            if not hasattr(self, key):
                raise ConfigError(f"Unknown configuration key: {key}")
            if key == 'plan_mode' and not isinstance(value, PlanMode):
                value = PlanMode(str(value).lower())
            setattr(self, key, value)
        return self

    def validate_config(self):
        """Validate configuration settings"""
        if self.sample_rate <= 0 or self.frame_size <= 0:
            raise ConfigError("FREEAUDIO_SAMPLE_RATE and FREEAUDIO_FRAME_SIZE must be positive")
        if self.max_seconds <= 0:
            raise ConfigError("FREEAUDIO_MAX_SECONDS must be positive")
        if abs(self.max_seconds * self.frame_rate - self.max_frames) > 1e-9:
            raise ConfigError("FREEAUDIO_MAX_SECONDS must span a whole number of latent frames")
        for name, value in (('FREEAUDIO_ALPHA', self.alpha), ('FREEAUDIO_BETA', self.beta),
                            ('FREEAUDIO_LAMBDA', self.lambda_)):
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be between 0 and 1")
        if self.beta_semantics not in ('timing', 'base'):
            raise ConfigError("FREEAUDIO_BETA_SEMANTICS must be 'timing' or 'base'")
        if not 0.0 < self.overlap_seconds < self.max_seconds:
            raise ConfigError("FREEAUDIO_OVERLAP_SECONDS must be in (0, FREEAUDIO_MAX_SECONDS)")
        overlap_frames = self.overlap_seconds * self.frame_rate
        if abs(overlap_frames - round(overlap_frames)) > 1e-9 or int(round(overlap_frames)) % 2:
            raise ConfigError("FREEAUDIO_OVERLAP_SECONDS must cover an even number of latent frames")
        if self.steps <= 0 or self.steps > self.train_timesteps:
            raise ConfigError("FREEAUDIO_STEPS must be in [1, FREEAUDIO_TRAIN_TIMESTEPS]")
        if self.guidance_scale < 0:
            raise ConfigError("FREEAUDIO_GUIDANCE_SCALE must be non-negative")
        if self.llm_timeout <= 0:
            raise ConfigError("FREEAUDIO_LLM_TIMEOUT must be positive")
        if self.llm_max_retries < 0:
            raise ConfigError("FREEAUDIO_LLM_MAX_RETRIES must be non-negative")
        return True

    def snapshot(self):
        """JSON-ready view of the configuration (never includes the API key)"""
        return {
            'sample_rate': self.sample_rate,
            'frame_size': self.frame_size,
            'max_seconds': self.max_seconds,
            'latent_scale': self.latent_scale,
            'plan_mode': self.plan_mode.value,
            'alpha': self.alpha,
            'beta': self.beta,
            'beta_semantics': self.beta_semantics,
            'lambda_': self.lambda_,
            'overlap_seconds': self.overlap_seconds,
            'steps': self.steps,
            'train_timesteps': self.train_timesteps,
            'guidance_scale': self.guidance_scale,
            'seed': self.seed,
            'llm_base_url': self.llm_base_url,
            'llm_model': self.llm_model,
            'llm_timeout': self.llm_timeout,
            'llm_max_retries': self.llm_max_retries,
        }

    @classmethod
    def from_snapshot(cls, snapshot):
        """Rebuild a configuration from a manifest snapshot"""
        config = cls()
        overrides = dict(snapshot)
        config.with_overrides(**overrides)
        return config

    # Component configs

    def codec_config(self):
        from codec.block_codec import CodecConfig
        return CodecConfig(sample_rate=self.sample_rate, frame_size=self.frame_size,
                           latent_scale=self.latent_scale)

    def sampler_config(self, seed=None):
        from diffusion.sampler import SamplerConfig
        return SamplerConfig(steps=self.steps, seed=self.seed if seed is None else seed,
                             guidance_scale=self.guidance_scale)

    def control_config(self):
        from control.attention_control import ControlConfig
        return ControlConfig(alpha=self.alpha, beta=self.beta, beta_semantics=self.beta_semantics)

    def longform_config(self):
        from longform.generator import LongformConfig
        return LongformConfig(max_seconds=self.max_seconds, overlap_seconds=self.overlap_seconds,
                              lambda_=self.lambda_)

    def llm_config(self):
        from llm_client.chat_client import LlmConfig
        return LlmConfig(base_url=self.llm_base_url, model=self.llm_model,
                         api_key_env=API_KEY_ENV, timeout_s=self.llm_timeout,
                         max_retries=self.llm_max_retries)

"""
Training loop for the toy DiT: epsilon-prediction MSE over active frames,
AdamW, InverseLR schedule with warmup, EMA weights and condition dropout.
"""

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List

import numpy as np
from tqdm import tqdm

from diffusion.schedule import NoiseSchedule
from dit.checkpoint import Checkpoint
from dit.model import DitConfig, ToyDiT, masked_mse
from numerics.rng import SeededRng
from utils.errors import ConfigError, DimensionError, NumericalError, TrainingDivergedError


@dataclass
class TrainingExample:
    """One clip: model-space latent (active frames x channels), caption and duration"""
    latent: np.ndarray
    caption: str
    duration_s: float


@dataclass
class TrainerConfig:
    lr: float = 5e-5
    betas: tuple = (0.9, 0.999)
    weight_decay: float = 1e-3
    adam_eps: float = 1e-8
    ema_decay: float = 0.999
    inverse_lr_gamma: float = 1e6
    power: float = 0.5
    warmup: float = 0.99
    steps: int = 1000
    batch_size: int = 8
    cond_dropout: float = 0.1
    grad_clip: float = 1.0
    seed: int = 0
    log_every: int = 100

    def __post_init__(self):
        self.betas = tuple(self.betas)
        if self.lr <= 0 or self.inverse_lr_gamma <= 0 or self.power <= 0:
            raise ConfigError("lr, inverse_lr_gamma and power must be positive")
        if not 0 < self.warmup < 1:
            raise ConfigError("warmup must lie in (0, 1)")
        if not 0 <= self.ema_decay < 1:
            raise ConfigError("ema_decay must lie in [0, 1)")
        if not 0 <= self.cond_dropout < 1:
            raise ConfigError("cond_dropout must lie in [0, 1)")
        if self.steps <= 0 or self.batch_size <= 0:
            raise ConfigError("steps and batch_size must be positive")

    def to_dict(self):
        return asdict(self)


class InverseLR:
    """lr(t) = lr0 * (1 + t / gamma) ** -power, ramped in by (1 - warmup ** (t + 1))"""

    def __init__(self, lr0: float, gamma: float = 1e6, power: float = 0.5, warmup: float = 0.99):
        self.lr0 = lr0
        self.gamma = gamma
        self.power = power
        self.warmup = warmup

    def base_lr(self, step: int) -> float:
        return self.lr0 * (1.0 + step / self.gamma) ** (-self.power)

    def lr(self, step: int) -> float:
        return self.base_lr(step) * (1.0 - self.warmup ** (step + 1))


class AdamW:
    """Adam with decoupled weight decay"""

    def __init__(self, params: Dict[str, np.ndarray], betas=(0.9, 0.999), weight_decay=1e-3, eps=1e-8):
        self.beta1, self.beta2 = betas
        self.weight_decay = weight_decay
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray], lr: float):
        self.t += 1
        bias1 = 1.0 - self.beta1 ** self.t
        bias2 = 1.0 - self.beta2 ** self.t
        for name in sorted(params):
            g = grads[name]
            self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            m_hat = self.m[name] / bias1
            v_hat = self.v[name] / bias2
            params[name] = params[name] * (1.0 - lr * self.weight_decay) - lr * m_hat / (np.sqrt(v_hat) + self.eps)


class EmaWeights:
    def __init__(self, params: Dict[str, np.ndarray], decay: float):
        self.decay = decay
        self.weights = {k: v.copy() for k, v in params.items()}

    def update(self, params: Dict[str, np.ndarray]):
        for name, value in params.items():
            self.weights[name] = self.decay * self.weights[name] + (1.0 - self.decay) * value


@dataclass
class TrainingBatch:
    x_t: np.ndarray
    timesteps: np.ndarray
    noise: np.ndarray
    conditions: list
    durations: np.ndarray


@dataclass
class TrainingHistory:
    losses: List[float] = field(default_factory=list)
    learning_rates: List[float] = field(default_factory=list)
    grad_norms: List[float] = field(default_factory=list)


class Trainer:
    def __init__(self, model: ToyDiT, config: TrainerConfig = None, schedule: NoiseSchedule = None,
                 logger=None, show_progress: bool = False):
        self.model = model
        self.config = config or TrainerConfig()
        self.schedule = schedule or NoiseSchedule()
        self.logger = logger
        self.show_progress = show_progress
        self.rng = SeededRng(self.config.seed).spawn('trainer')
        self.lr_schedule = InverseLR(self.config.lr, self.config.inverse_lr_gamma, self.config.power,
                                     self.config.warmup)
        self.optimizer = AdamW(model.params, self.config.betas, self.config.weight_decay, self.config.adam_eps)
        self.ema = EmaWeights(model.params, self.config.ema_decay)
        self.step_count = 0
        self.history = TrainingHistory()

    def make_batch(self, dataset: List[TrainingExample]) -> TrainingBatch:
        """Draw examples, timesteps and noise; drop captions with probability cond_dropout"""
        c = self.model.config
        indices = self.rng.integers(0, len(dataset), size=self.config.batch_size)
        x0 = np.zeros((self.config.batch_size, c.max_frames, c.in_channels))
        conditions = []
        durations = np.zeros(self.config.batch_size)
        for row, index in enumerate(indices):
            example = dataset[int(index)]
            frames = example.latent.shape[0]
            if frames > c.max_frames or example.latent.shape[1] != c.in_channels:
                raise DimensionError(f"Example latent {example.latent.shape} does not fit the model")
            x0[row, :frames] = example.latent
            durations[row] = example.duration_s
            if self.rng.random() < self.config.cond_dropout:
                conditions.append(self.model.null_condition())
            else:
                conditions.append(self.model.embed_text(example.caption))
        timesteps = self.rng.integers(0, self.schedule.steps, size=self.config.batch_size)
        noise = self.rng.normal(x0.shape)
        x_t = self.schedule.q_sample(x0, timesteps, noise)
        return TrainingBatch(x_t=x_t, timesteps=timesteps, noise=noise, conditions=conditions, durations=durations)

    def train_step(self, batch: TrainingBatch) -> float:
        """One optimizer step on a prepared batch; returns the loss"""
        step = self.step_count
        lr = self.lr_schedule.lr(step)
        try:
            prediction, cache = self.model.forward(batch.x_t, batch.timesteps, batch.conditions,
                                                   batch.durations, keep_cache=True)
            loss, d_out = masked_mse(prediction, batch.noise, cache['lengths'])
            grads = self.model.backward(d_out, cache)
        except NumericalError:
            raise TrainingDivergedError(step, float('nan'), lr, float('nan'))
        grad_norm = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
        if not math.isfinite(loss) or not math.isfinite(grad_norm):
            raise TrainingDivergedError(step, loss, lr, grad_norm)
        if self.config.grad_clip and grad_norm > self.config.grad_clip:
            scale = self.config.grad_clip / grad_norm
            grads = {k: g * scale for k, g in grads.items()}

        self.optimizer.step(self.model.params, grads, lr)
        self.ema.update(self.model.params)
        self.step_count += 1
        self.history.losses.append(loss)
        self.history.learning_rates.append(lr)
        self.history.grad_norms.append(grad_norm)
        if self.logger and (step % self.config.log_every == 0 or step == self.config.steps - 1):
            self.logger.log_training_step(step, loss, lr, grad_norm)
        return loss

    def train(self, dataset: List[TrainingExample], steps: int = None) -> Checkpoint:
        if not dataset:
            raise DimensionError("Training dataset is empty")
        steps = steps or self.config.steps
        if self.logger:
            self.logger.info(f"🏋️ Training {self.model.num_parameters()} parameters on {len(dataset)} clips "
                             f"for {steps} steps")
        for _ in tqdm(range(steps), desc='train', disable=not self.show_progress):
            self.train_step(self.make_batch(dataset))
        return self.checkpoint()

    def checkpoint(self, metadata: dict = None) -> Checkpoint:
        meta = {'trainer': self.config.to_dict()}
        if self.history.losses:
            meta['final_loss'] = self.history.losses[-1]
        meta.update(metadata or {})
        return Checkpoint(config=self.model.config, weights=self.model.state_dict(),
                          ema_weights={k: v.copy() for k, v in self.ema.weights.items()},
                          step=self.step_count, metadata=meta)


def train(model: ToyDiT, dataset: List[TrainingExample], config: TrainerConfig = None,
          schedule: NoiseSchedule = None, logger=None, show_progress: bool = False) -> Checkpoint:
    """Train a model and return a checkpoint with raw and EMA weights"""
    return Trainer(model, config, schedule, logger, show_progress).train(dataset)


# Training manifests

def write_training_manifest(path, shards: List[str], seed: int, trainer_config: TrainerConfig,
                            dit_config: DitConfig, codec_snapshot: dict, checkpoint_path: str) -> Path:
    manifest = {
        'shards': [str(s) for s in shards],
        'seed': seed,
        'trainer': trainer_config.to_dict(),
        'dit': dit_config.to_dict(),
        'codec': codec_snapshot,
        'checkpoint': str(checkpoint_path),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding='utf-8')
    return path


def read_training_manifest(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Training manifest not found: {path}")
    manifest = json.loads(path.read_text(encoding='utf-8'))
    manifest['trainer'] = TrainerConfig(**manifest['trainer'])
    manifest['dit'] = DitConfig.from_dict(manifest['dit'])
    return manifest


def train_from_manifest(path, logger=None, show_progress: bool = False) -> Checkpoint:
    """Re-run the training described by a manifest"""
    from codec.block_codec import BlockCodec, CodecConfig
    from evaluation.synth_data import examples_from_shard

    manifest = read_training_manifest(path)
    codec_snapshot = dict(manifest['codec'])
    codec_snapshot['model_bins'] = tuple(codec_snapshot['model_bins'])
    codec = BlockCodec(CodecConfig(**codec_snapshot))
    dataset = []
    for shard in manifest['shards']:
        dataset.extend(examples_from_shard(shard, codec))
    model = ToyDiT(manifest['dit'], seed=manifest['seed'], logger=logger)
    return train(model, dataset, manifest['trainer'], logger=logger, show_progress=show_progress)

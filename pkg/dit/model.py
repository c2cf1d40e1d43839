"""
Toy diffusion transformer (numpy) with hand-derived backpropagation.

Tokens are latent frames. Every layer runs self-attention over the active
prefix, cross-attention over the caption's token embeddings and a GELU MLP,
each pre-normalized and residual. The diffusion step and the clip duration
enter as one global conditioning vector added to every token.
"""

from dataclasses import asdict, dataclass, field
from typing import Dict, List, Sequence

import numpy as np

from dit.hooks import CROSS, POST_OUTPUT, PRE_QUERY, SELF, AttentionContext, HookSet
from dit.layers import (gelu, gelu_backward, layer_norm_backward, layer_norm_forward, linear,
                        linear_backward, mha_backward, mha_forward, positional_table,
                        sinusoidal_embedding)
from dit.text_encoder import TextCondition, TextEncoder
from models.events import vocabulary
from numerics.rng import SeededRng
from utils.errors import ConfigError, DimensionError
from utils.time_grid import round_half_up

LAYER_PARAMS = ('ln1_g', 'ln1_b', 'sa_wq', 'sa_wk', 'sa_wv', 'sa_wo', 'sa_bo',
                'ln2_g', 'ln2_b', 'ca_wq', 'ca_wk', 'ca_wv', 'ca_wo', 'ca_bo',
                'ln3_g', 'ln3_b', 'mlp_w1', 'mlp_b1', 'mlp_w2', 'mlp_b2')


@dataclass
class DitConfig:
    dim: int = 64
    layers: int = 4
    heads: int = 4
    text_dim: int = 32
    in_channels: int = 16
    max_frames: int = 250
    frame_rate: float = 25.0
    mlp_ratio: int = 2
    vocab: List[str] = field(default_factory=vocabulary)

    def __post_init__(self):
        if self.dim % self.heads:
            raise ConfigError(f"dim {self.dim} is not divisible by {self.heads} heads")
        if min(self.dim, self.layers, self.heads, self.text_dim, self.in_channels, self.max_frames) <= 0:
            raise ConfigError("DiT sizes must be positive")
        self.vocab = list(self.vocab)

    @property
    def max_seconds(self):
        return self.max_frames / self.frame_rate

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        return cls(**data)


class ToyDiT:
    """Noise-prediction transformer over (batch, frames, channels) latents"""

    def __init__(self, config: DitConfig = None, seed: int = 0, logger=None):
        self.config = config or DitConfig()
        self.logger = logger
        self.text_encoder = TextEncoder(self.config.vocab)
        self.positions = positional_table(self.config.max_frames, self.config.dim)
        self.params = self._init_params(SeededRng(seed).spawn('dit-init'))

    # Parameters

    def _init_params(self, rng: SeededRng, std: float = 0.02) -> Dict[str, np.ndarray]:
        c = self.config
        D, T, C, H = c.dim, c.text_dim, c.in_channels, c.dim * c.mlp_ratio
        shapes = {
            'w_in': (C, D), 'b_in': (D,), 'pad_emb': (D,),
            'w_t': (D, D), 'w_d': (D, D), 'b_c': (D,),
            'tok_emb': (len(self.text_encoder), T),
            'lnf_g': (D,), 'lnf_b': (D,), 'w_out': (D, C), 'b_out': (C,),
        }
        layer_shapes = {
            'ln1_g': (D,), 'ln1_b': (D,), 'sa_wq': (D, D), 'sa_wk': (D, D), 'sa_wv': (D, D),
            'sa_wo': (D, D), 'sa_bo': (D,),
            'ln2_g': (D,), 'ln2_b': (D,), 'ca_wq': (D, D), 'ca_wk': (T, D), 'ca_wv': (T, D),
            'ca_wo': (D, D), 'ca_bo': (D,),
            'ln3_g': (D,), 'ln3_b': (D,), 'mlp_w1': (D, H), 'mlp_b1': (H,), 'mlp_w2': (H, D), 'mlp_b2': (D,),
        }
        for layer in range(c.layers):
            for name, shape in layer_shapes.items():
                shapes[f'l{layer}.{name}'] = shape

        params = {}
        for name in sorted(shapes):
            shape = shapes[name]
            short = name.split('.')[-1]
            if short.endswith('_g'):
                params[name] = np.ones(shape)
            elif short in ('tok_emb', 'pad_emb'):
                params[name] = rng.normal(shape) * 0.5
            elif len(shape) == 2 and short != 'w_out':
                params[name] = rng.normal(shape) * std * np.sqrt(64.0 / shape[0])
            else:
                # biases, LN shifts and the zero-initialized output projection
                params[name] = np.zeros(shape)
        return params

    def randomize(self, seed: int, scale: float = 0.3):
        """Fill every parameter with random values (tests and non-degeneracy checks)"""
        rng = SeededRng(seed).spawn('dit-randomize')
        for name in sorted(self.params):
            self.params[name] = rng.normal(self.params[name].shape) * scale
            if name.endswith('_g'):
                self.params[name] += 1.0
        return self

    def zero(self):
        for name in self.params:
            self.params[name] = np.zeros_like(self.params[name])
        return self

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: value.copy() for name, value in self.params.items()}

    def load_state_dict(self, state: Dict[str, np.ndarray]):
        missing = set(self.params) - set(state)
        unexpected = set(state) - set(self.params)
        if missing or unexpected:
            raise DimensionError(f"State mismatch: missing {sorted(missing)}, unexpected {sorted(unexpected)}")
        for name, value in state.items():
            if value.shape != self.params[name].shape:
                raise DimensionError(f"Parameter {name} has shape {value.shape}, expected {self.params[name].shape}")
            self.params[name] = np.array(value, dtype=np.float64)
        return self

    def num_parameters(self):
        return int(sum(v.size for v in self.params.values()))

    # Conditioning

    def embed_text(self, caption: str) -> TextCondition:
        condition = self.text_encoder.encode(caption)
        condition.embeddings = self.params['tok_emb'][condition.tokens]
        return condition

    def null_condition(self) -> TextCondition:
        condition = self.text_encoder.null_condition()
        condition.embeddings = self.params['tok_emb'][condition.tokens]
        return condition

    def active_lengths(self, durations: Sequence[float], frames: int) -> np.ndarray:
        """Active prefix length (frames) of each element: round(duration * frame_rate)"""
        lengths = []
        for duration in durations:
            if not 0 < duration <= self.config.max_seconds + 1e-9:
                raise DimensionError(f"Duration {duration}s outside (0, {self.config.max_seconds}]")
            lengths.append(min(max(round_half_up(duration * self.config.frame_rate), 1), frames))
        return np.array(lengths, dtype=np.int64)

    # Forward

    def _check_inputs(self, x, text_conditions, durations):
        if x.ndim != 3 or x.shape[2] != self.config.in_channels:
            raise DimensionError(f"Latent batch must be (batch, frames, {self.config.in_channels}), got {x.shape}")
        if x.shape[1] > self.config.max_frames:
            raise DimensionError(f"{x.shape[1]} frames exceed max_frames {self.config.max_frames}")
        if len(text_conditions) != x.shape[0] or len(durations) != x.shape[0]:
            raise DimensionError("Need one text condition and one duration per batch element")
        for condition in text_conditions:
            if condition.tokens.size == 0 or condition.tokens.max() >= len(self.text_encoder):
                raise DimensionError(f"Caption '{condition.caption}' has tokens outside the vocabulary")

    def forward(self, x, timesteps, text_conditions: List[TextCondition], durations,
                hooks: HookSet = None, pass_name: str = 'cond', keep_cache: bool = False):
        """Predict noise for a (batch, frames, channels) latent batch.

        Returns the prediction, plus the backward cache when keep_cache is set.
        """
        x = np.asarray(x, dtype=np.float64)
        self._check_inputs(x, text_conditions, durations)
        p = self.params
        c = self.config
        B, N, _ = x.shape
        heads = c.heads
        timesteps = np.broadcast_to(np.asarray(timesteps, dtype=np.float64), (B,))
        durations = np.asarray(durations, dtype=np.float64)
        lengths = self.active_lengths(durations, N)
        mask = (np.arange(N)[None, :] < lengths[:, None])[..., None]

        t_emb = sinusoidal_embedding(timesteps, c.dim)
        d_emb = sinusoidal_embedding(durations * c.frame_rate, c.dim)
        cond = linear(t_emb, p['w_t']) + linear(d_emb, p['w_d']) + p['b_c']
        h_in = linear(x, p['w_in'], p['b_in'])
        h = np.where(mask, h_in, p['pad_emb']) + self.positions[:N] + cond[:, None, :]
        text = [p['tok_emb'][tc.tokens] for tc in text_conditions]

        cache = {'x': x, 'mask': mask, 'lengths': lengths, 't_emb': t_emb, 'd_emb': d_emb,
                 'text': text, 'tokens': [tc.tokens for tc in text_conditions], 'layers': []}

        for layer in range(c.layers):
            lp = lambda name: p[f'l{layer}.{name}']
            lc = {}

            # Self-attention over each element's active prefix
            a, lc['ln1'] = layer_norm_forward(h, lp('ln1_g'), lp('ln1_b'))
            q, k, v = linear(a, lp('sa_wq')), linear(a, lp('sa_wk')), linear(a, lp('sa_wv'))
            if hooks is not None:
                q = hooks.apply(q, AttentionContext(SELF, layer, PRE_QUERY, heads, lengths, q, k, v, pass_name))
            o = np.empty_like(q)
            probs = []
            for b in range(B):
                n = lengths[b]
                o[b], pb = mha_forward(q[b], k[b, :n], v[b, :n], heads)
                probs.append(pb)
            if hooks is not None:
                o = hooks.apply(o, AttentionContext(SELF, layer, POST_OUTPUT, heads, lengths, q, k, v, pass_name))
            lc.update(a=a, q=q, k=k, v=v, probs=probs, o=o)
            h = h + linear(o, lp('sa_wo'), lp('sa_bo'))

            # Cross-attention over caption tokens
            a2, lc['ln2'] = layer_norm_forward(h, lp('ln2_g'), lp('ln2_b'))
            cq = linear(a2, lp('ca_wq'))
            ck = [linear(e, lp('ca_wk')) for e in text]
            cv = [linear(e, lp('ca_wv')) for e in text]
            if hooks is not None:
                cq = hooks.apply(cq, AttentionContext(CROSS, layer, PRE_QUERY, heads, lengths, cq, ck, cv, pass_name))
            co = np.empty_like(cq)
            cprobs = []
            for b in range(B):
                co[b], pb = mha_forward(cq[b], ck[b], cv[b], heads)
                cprobs.append(pb)
            if hooks is not None:
                co = hooks.apply(co, AttentionContext(CROSS, layer, POST_OUTPUT, heads, lengths, cq, ck, cv, pass_name))
            lc.update(a2=a2, cq=cq, ck=ck, cv=cv, cprobs=cprobs, co=co)
            h = h + linear(co, lp('ca_wo'), lp('ca_bo'))

            # MLP
            a3, lc['ln3'] = layer_norm_forward(h, lp('ln3_g'), lp('ln3_b'))
            u = linear(a3, lp('mlp_w1'), lp('mlp_b1'))
            g = gelu(u)
            lc.update(a3=a3, u=u, g=g)
            h = h + linear(g, lp('mlp_w2'), lp('mlp_b2'))
            cache['layers'].append(lc)

        hf, cache['lnf'] = layer_norm_forward(h, p['lnf_g'], p['lnf_b'])
        cache['hf'] = hf
        out = linear(hf, p['w_out'], p['b_out'])
        if keep_cache:
            return out, cache
        return out

    def predict_noise(self, latents, timestep, text_conditions, durations, hooks=None, pass_name='cond'):
        """Denoiser interface used by the sampler"""
        return self.forward(latents, timestep, text_conditions, durations, hooks=hooks, pass_name=pass_name)

    # Backward

    def backward(self, d_out, cache) -> Dict[str, np.ndarray]:
        """Gradients of a scalar loss wrt every parameter given dLoss/dOutput (hook-free forward)"""
        p = self.params
        c = self.config
        heads = c.heads
        grads = {name: np.zeros_like(value) for name, value in p.items()}
        B = d_out.shape[0]
        lengths = cache['lengths']

        dhf, grads['w_out'], grads['b_out'] = linear_backward(d_out, cache['hf'], p['w_out'])
        dh, grads['lnf_g'], grads['lnf_b'] = layer_norm_backward(dhf, cache['lnf'], p['lnf_g'])

        for layer in reversed(range(c.layers)):
            lc = cache['layers'][layer]
            name = lambda short: f'l{layer}.{short}'

            # MLP
            dg, grads[name('mlp_w2')], grads[name('mlp_b2')] = linear_backward(dh, lc['g'], p[name('mlp_w2')])
            du = gelu_backward(dg, lc['u'])
            da3, grads[name('mlp_w1')], grads[name('mlp_b1')] = linear_backward(du, lc['a3'], p[name('mlp_w1')])
            dx, grads[name('ln3_g')], grads[name('ln3_b')] = layer_norm_backward(da3, lc['ln3'], p[name('ln3_g')])
            dh = dh + dx

            # Cross-attention
            dco, grads[name('ca_wo')], grads[name('ca_bo')] = linear_backward(dh, lc['co'], p[name('ca_wo')])
            dcq = np.empty_like(lc['cq'])
            for b in range(B):
                dq_b, dk_b, dv_b = mha_backward(dco[b], lc['cq'][b], lc['ck'][b], lc['cv'][b], lc['cprobs'][b], heads)
                dcq[b] = dq_b
                text = cache['text'][b]
                grads[name('ca_wk')] += text.T @ dk_b
                grads[name('ca_wv')] += text.T @ dv_b
                d_text = dk_b @ p[name('ca_wk')].T + dv_b @ p[name('ca_wv')].T
                np.add.at(grads['tok_emb'], cache['tokens'][b], d_text)
            da2, grads[name('ca_wq')], _ = linear_backward(dcq, lc['a2'], p[name('ca_wq')])
            dx, grads[name('ln2_g')], grads[name('ln2_b')] = layer_norm_backward(da2, lc['ln2'], p[name('ln2_g')])
            dh = dh + dx

            # Self-attention
            do, grads[name('sa_wo')], grads[name('sa_bo')] = linear_backward(dh, lc['o'], p[name('sa_wo')])
            dq = np.empty_like(lc['q'])
            dk = np.zeros_like(lc['k'])
            dv = np.zeros_like(lc['v'])
            for b in range(B):
                n = lengths[b]
                dq[b], dk[b, :n], dv[b, :n] = mha_backward(do[b], lc['q'][b], lc['k'][b, :n], lc['v'][b, :n],
                                                           lc['probs'][b], heads)
            da_q, grads[name('sa_wq')], _ = linear_backward(dq, lc['a'], p[name('sa_wq')])
            da_k, grads[name('sa_wk')], _ = linear_backward(dk, lc['a'], p[name('sa_wk')])
            da_v, grads[name('sa_wv')], _ = linear_backward(dv, lc['a'], p[name('sa_wv')])
            dx, grads[name('ln1_g')], grads[name('ln1_b')] = layer_norm_backward(da_q + da_k + da_v, lc['ln1'],
                                                                                 p[name('ln1_g')])
            dh = dh + dx

        # Embeddings and global conditioning
        mask = cache['mask']
        d_cond = dh.sum(axis=1)
        _, grads['w_t'], _ = linear_backward(d_cond, cache['t_emb'], p['w_t'])
        _, grads['w_d'], _ = linear_backward(d_cond, cache['d_emb'], p['w_d'])
        grads['b_c'] = d_cond.sum(axis=0)
        grads['pad_emb'] = np.where(mask, 0.0, dh).reshape(-1, c.dim).sum(axis=0)
        d_in = np.where(mask, dh, 0.0)
        _, grads['w_in'], grads['b_in'] = linear_backward(d_in, cache['x'], p['w_in'])
        return grads


def masked_mse(prediction, target, lengths):
    """Mean squared error over active frames only; returns (loss, dLoss/dPrediction)"""
    B, N, C = prediction.shape
    mask = (np.arange(N)[None, :] < np.asarray(lengths)[:, None])[..., None]
    count = float(np.sum(lengths) * C)
    diff = np.where(mask, prediction - target, 0.0)
    loss = float(np.sum(diff ** 2) / count)
    return loss, 2.0 * diff / count

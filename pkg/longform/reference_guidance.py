"""
Reference guidance: pull every segment's self-attention output toward
attention over a reference segment's keys and values.

    o' = lambda * Attention(q, k_ref, v_ref) + (1 - lambda) * o
"""

from dataclasses import dataclass, field
from typing import Dict, Sequence

import numpy as np

from dit.hooks import SELF
from numerics.kernels import multi_head_attention
from utils.errors import ConfigError, DimensionError


@dataclass
class ReferenceState:
    """Per-layer reference keys/values of the current forward pass and the guidance weight"""
    lambda_: float = 0.2
    heads: int = 4
    keys: Dict[int, np.ndarray] = field(default_factory=dict)
    values: Dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lambda_}")

    def refresh(self, layer: int, keys: np.ndarray, values: np.ndarray):
        if keys.shape[0] != values.shape[0]:
            raise DimensionError(f"Reference keys {keys.shape} and values {values.shape} disagree")
        self.keys[layer] = keys
        self.values[layer] = values


def reference_guidance(q: np.ndarray, o: np.ndarray, ref: ReferenceState, layer: int) -> np.ndarray:
    """Blend o with attention of q over the reference keys/values cached for a layer"""
    if q.shape[0] != o.shape[0]:
        raise DimensionError(f"Queries {q.shape} and outputs {o.shape} disagree")
    if ref.lambda_ == 0.0:
        return o
    if layer not in ref.keys:
        raise DimensionError(f"No reference keys cached for layer {layer}")
    k_ref, v_ref = ref.keys[layer], ref.values[layer]
    if k_ref.shape[1] != q.shape[1] or v_ref.shape[1] != o.shape[1]:
        raise DimensionError(f"Reference width {k_ref.shape[1]}/{v_ref.shape[1]} does not match "
                             f"{q.shape[1]}/{o.shape[1]}")
    guided = multi_head_attention(q, k_ref, v_ref, ref.heads)
    if ref.lambda_ == 1.0:
        return guided
    return ref.lambda_ * guided + (1.0 - ref.lambda_) * o


class ReferenceGuidance:
    """Self-attention post-output callback: refreshes the reference cache, then guides the targets"""

    def __init__(self, state: ReferenceState, reference_index: int, target_indices: Sequence[int], logger=None):
        if reference_index in target_indices:
            raise ConfigError("The reference segment cannot guide itself")
        self.state = state
        self.reference_index = reference_index
        self.target_indices = list(target_indices)
        self.logger = logger

    def __call__(self, o, context):
        if context.kind != SELF:
            return o
        k_ref, v_ref = context.active_keys(self.reference_index)
        self.state.refresh(context.layer, k_ref, v_ref)
        if self.state.lambda_ == 0.0 or not self.target_indices:
            return o
        out = o.copy()
        for b in self.target_indices:
            n = int(context.active_lengths[b])
            out[b, :n] = reference_guidance(context.queries[b, :n], o[b, :n], self.state, context.layer)
        return out

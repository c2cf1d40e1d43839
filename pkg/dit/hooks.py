"""
Attention interception hooks.

A hook site is (kind, layer, phase) with kind in {self, cross} and phase in
{pre_query, post_output}. Callbacks receive the whole batch tensor at the site
(batch x frames x dim) plus an AttentionContext, and return the tensor to use.
At most one callback may be registered per site.
"""

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from numerics.kernels import multi_head_attention
from utils.errors import HookError

SELF = 'self'
CROSS = 'cross'
PRE_QUERY = 'pre_query'
POST_OUTPUT = 'post_output'

KINDS = (SELF, CROSS)
PHASES = (PRE_QUERY, POST_OUTPUT)


@dataclass
class AttentionContext:
    """What a callback can see at a hook site.

    For self-attention keys/values are (batch, frames, dim) arrays whose rows
    beyond active_lengths[b] are not attended to; for cross-attention they are
    per-element lists of (tokens, dim) arrays.
    """
    kind: str
    layer: int
    phase: str
    heads: int
    active_lengths: np.ndarray
    queries: np.ndarray
    keys: object
    values: object
    pass_name: str = 'cond'

    def active_keys(self, batch_index: int):
        if self.kind == SELF:
            n = int(self.active_lengths[batch_index])
            return self.keys[batch_index, :n], self.values[batch_index, :n]
        return self.keys[batch_index], self.values[batch_index]

    def attend(self, q, k, v):
        return multi_head_attention(q, k, v, self.heads)


def chain_callbacks(*callbacks: Callable) -> Callable:
    """Compose callbacks left to right into one site callback"""
    active = [cb for cb in callbacks if cb is not None]

    def chained(tensor, context):
        for callback in active:
            tensor = callback(tensor, context)
        return tensor

    return chained


class HookSet:
    """Registry of hook callbacks keyed by (kind, layer, phase)"""

    def __init__(self):
        self._callbacks: Dict[tuple, Callable] = {}

    @staticmethod
    def _key(kind, layer, phase):
        if kind not in KINDS or phase not in PHASES:
            raise HookError(f"Unknown hook site ({kind}, {phase})")
        return (kind, int(layer), phase)

    def register(self, kind: str, layer: int, phase: str, callback: Callable) -> tuple:
        key = self._key(kind, layer, phase)
        if key in self._callbacks:
            raise HookError(f"A callback is already registered at {key}")
        self._callbacks[key] = callback
        return key

    def remove(self, handle: tuple):
        self._callbacks.pop(handle, None)

    def get(self, kind: str, layer: int, phase: str) -> Optional[Callable]:
        return self._callbacks.get((kind, layer, phase))

    def apply(self, tensor, context: AttentionContext):
        callback = self._callbacks.get((context.kind, context.layer, context.phase))
        if callback is None:
            return tensor
        result = callback(tensor, context)
        if result.shape != tensor.shape:
            raise HookError(f"Hook at ({context.kind}, {context.layer}, {context.phase}) changed shape "
                            f"{tensor.shape} -> {result.shape}")
        return result

    def sites(self) -> List[tuple]:
        return sorted(self._callbacks)

    def clear(self):
        self._callbacks.clear()

    def __len__(self):
        return len(self._callbacks)

    def __contains__(self, key):
        return key in self._callbacks

"""
Decoupling and aggregating attention control over a 1 + k latent batch.

Element base_index is the base latent conditioned on the overall caption;
each layout window j is served by sub-latent windows[j][2], conditioned on the
window's recaption, whose active prefix is as long as the window.

    decouple (cross pre-query):  sub_j queries [0, len_j) <- base queries [start_j, end_j)
    aggregate (post-output):     base prefix <- r * o_base + (1 - r) * concat_j(sub_j output [0, len_j))
"""

from dataclasses import dataclass, field

import numpy as np

from dit.hooks import CROSS, POST_OUTPUT, PRE_QUERY, SELF, chain_callbacks
from models.layouts import TimingLayout
from models.timing import WindowPlan
from utils.errors import ConfigError, HookError, LayoutError
from utils.time_grid import round_half_up

BETA_TIMING = 'timing'
BETA_BASE = 'base'


@dataclass
class ControlConfig:
    """alpha fuses at cross-attention sites, beta at self-attention sites"""
    alpha: float = 0.2
    beta: float = 0.8
    beta_semantics: str = BETA_TIMING
    decouple_enabled: bool = True
    aggregate_sites: frozenset = field(default_factory=lambda: frozenset({SELF, CROSS}))
    keep_sub_latents: bool = False

    def __post_init__(self):
        self.aggregate_sites = frozenset(self.aggregate_sites)
        for name, value in (('alpha', self.alpha), ('beta', self.beta)):
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1], got {value}")
        if self.beta_semantics not in (BETA_TIMING, BETA_BASE):
            raise ConfigError(f"beta_semantics must be '{BETA_TIMING}' or '{BETA_BASE}'")
        if not self.aggregate_sites <= {SELF, CROSS}:
            raise ConfigError(f"Unknown aggregate sites {set(self.aggregate_sites)}")

    def ratio(self, kind: str) -> float:
        """Weight kept on the base output at a site"""
        if kind == CROSS:
            return self.alpha
        return 1.0 - self.beta if self.beta_semantics == BETA_TIMING else self.beta


def layout_from_plan(plan: WindowPlan, frame_rate: float, base_active_frames: int = None,
                     base_index: int = 0, first_sub_index: int = None, logger=None) -> TimingLayout:
    """Map plan windows to frame ranges (round-half-up); windows rounding to no frames are dropped with a warning"""
    total_frames = round_half_up(plan.total_s * frame_rate)
    if base_active_frames is None:
        base_active_frames = total_frames
    if total_frames != base_active_frames:
        raise LayoutError(f"Plan spans {total_frames} frames, base has {base_active_frames} active")
    boundaries = [round_half_up(t * frame_rate) for t in plan.boundaries()]
    boundaries[0], boundaries[-1] = 0, base_active_frames

    # Rounding is monotone, so dropping empty ranges leaves the rest contiguous
    ranges = []
    plan_indices = []
    for index, (start, end) in enumerate(zip(boundaries, boundaries[1:])):
        if end > start:
            ranges.append((start, end))
            plan_indices.append(index)
        elif logger:
            logger.warning(f"⚠️ Window {index} {plan.windows[index]} covers no frames at {frame_rate} fps; dropped")
    if not ranges:
        raise LayoutError("Plan maps to no frames")

    first = base_index + 1 if first_sub_index is None else first_sub_index
    windows = [(start, end, first + j) for j, (start, end) in enumerate(ranges)]
    return TimingLayout(frame_rate=frame_rate, windows=windows, base_active_frames=base_active_frames,
                        base_index=base_index, plan_indices=plan_indices)


def decouple_queries(q_batch: np.ndarray, layout: TimingLayout) -> np.ndarray:
    """Copy base queries of each window onto the head of its sub-latent"""
    layout.check_batch(q_batch.shape[0], q_batch.shape[1])
    out = q_batch.copy()
    base = layout.base_index
    for start, end, batch_index in layout.windows:
        out[batch_index, :end - start] = q_batch[base, start:end]
    return out


def timing_output(o_batch: np.ndarray, layout: TimingLayout) -> np.ndarray:
    """Concatenate each sub-latent's active segment in window order"""
    return np.concatenate([o_batch[batch_index, :end - start] for start, end, batch_index in layout.windows],
                          axis=0)


def aggregate_outputs(o_batch: np.ndarray, layout: TimingLayout, ratio: float) -> np.ndarray:
    """Fuse the concatenated sub outputs into the base active prefix"""
    layout.check_batch(o_batch.shape[0], o_batch.shape[1])
    if sum(layout.lengths()) != layout.base_active_frames:
        raise LayoutError(f"Window lengths sum to {sum(layout.lengths())}, "
                          f"base has {layout.base_active_frames} active frames")
    out = o_batch.copy()
    if ratio == 1.0:
        return out
    base = layout.base_index
    active = layout.base_active_frames
    o_timing = timing_output(o_batch, layout)
    if ratio == 0.0:
        out[base, :active] = o_timing
    else:
        out[base, :active] = ratio * o_batch[base, :active] + (1.0 - ratio) * o_timing
    return out


class TimingController:
    """Hook callbacks applying decoupling/aggregation for one or more 1 + k groups"""

    def __init__(self, layouts, config: ControlConfig = None, logger=None):
        self.layouts = list(layouts) if isinstance(layouts, (list, tuple)) else [layouts]
        self.config = config or ControlConfig()
        self.logger = logger
        self._sampler = None
        self._handles = []

    @property
    def installed(self):
        return self._sampler is not None

    def cross_pre_query(self, q, context):
        for layout in self.layouts:
            q = decouple_queries(q, layout)
        return q

    def aggregate(self, o, context):
        ratio = self.config.ratio(context.kind)
        for layout in self.layouts:
            o = aggregate_outputs(o, layout, ratio)
        return o

    def callbacks(self):
        """(kind, phase) -> callback for every site this controller touches"""
        sites = {}
        if self.config.decouple_enabled:
            sites[(CROSS, PRE_QUERY)] = self.cross_pre_query
        for kind in sorted(self.config.aggregate_sites):
            sites[(kind, POST_OUTPUT)] = self.aggregate
        return sites

    def install(self, sampler, model, extra=None):
        """Register callbacks on every layer; extra maps (kind, phase) to a callback run before ours"""
        if self.installed:
            raise HookError("Timing control is already installed")
        for layout in self.layouts:
            if layout.base_active_frames > model.config.max_frames:
                raise LayoutError(f"Layout needs {layout.base_active_frames} frames, model supports "
                                  f"{model.config.max_frames}")
        sites = self.callbacks()
        for key, callback in (extra or {}).items():
            sites[key] = chain_callbacks(callback, sites[key]) if key in sites else callback
        handles = []
        try:
            for layer in range(model.config.layers):
                for (kind, phase), callback in sorted(sites.items()):
                    handles.append(sampler.hooks.register(kind, layer, phase, callback))
        except HookError:
            for handle in handles:
                sampler.hooks.remove(handle)
            raise
        self._handles = handles
        self._sampler = sampler
        if self.logger:
            self.logger.debug(f"Installed timing control on {len(handles)} hook sites "
                              f"(alpha={self.config.alpha}, beta={self.config.beta})")
        return self

    def uninstall(self):
        if not self.installed:
            return
        for handle in self._handles:
            self._sampler.hooks.remove(handle)
        self._handles = []
        self._sampler = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.uninstall()


def install(sampler, model, layout: TimingLayout, config: ControlConfig = None, logger=None) -> TimingController:
    """Install timing control for one layout; call .uninstall() on the result to restore hook-free sampling"""
    return TimingController(layout, config, logger).install(sampler, model)

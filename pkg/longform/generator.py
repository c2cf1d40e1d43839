"""
Long-form generation: all segments denoise in one lockstep batch.

Batch layout: the n segment base latents occupy rows 0..n-1, followed by the
sub-latents of every timing-controlled segment. At each step the sampler
hands the predicted clean batch to compose_latents; inside every self-attention
layer the reference segment's keys/values guide the other segments' bases
before sub outputs are aggregated into them.
"""

from dataclasses import dataclass, field
from typing import List

import numpy as np

from control.attention_control import ControlConfig, TimingController, layout_from_plan
from dit.hooks import POST_OUTPUT, SELF
from longform.reference_guidance import ReferenceGuidance, ReferenceState
from longform.segments import compose_latents, plan_segments, trim_concat
from models.layouts import SegmentLayout, TimingLayout
from models.timing import WindowPlan
from numerics.rng import SeededRng
from utils.errors import ConfigError, LayoutError


@dataclass
class LongformConfig:
    max_seconds: float = 10.0
    overlap_seconds: float = 2.0
    lambda_: float = 0.2
    reference_index: int = 0
    compose: bool = True
    use_control: bool = True
    independent: bool = False

    def __post_init__(self):
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lambda_}")
        if not 0.0 < self.overlap_seconds < self.max_seconds:
            raise ConfigError(f"Overlap {self.overlap_seconds}s must lie in (0, {self.max_seconds}s)")


@dataclass
class LongformResult:
    waveform: np.ndarray
    layout: SegmentLayout
    segment_waveforms: List[np.ndarray] = field(default_factory=list)
    segment_latents: List[np.ndarray] = field(default_factory=list)


@dataclass
class SegmentBatch:
    """Captions, durations, noise and timing layouts of a batch holding one or more segments"""
    captions: List[str]
    durations: List[float]
    noise: np.ndarray
    base_indices: List[int]
    timing_layouts: List[TimingLayout]


def build_segment_batch(layout: SegmentLayout, segment_ids, channels: int, seed: int,
                        use_control: bool = True, logger=None) -> SegmentBatch:
    """Bases first, then sub-latents; base noise is cut from one timeline so overlaps start identical"""
    segment_ids = list(segment_ids)
    frames = layout.seg_frames
    rate = layout.frame_rate
    timeline = SeededRng(seed).spawn('timeline').normal((layout.total_frames, channels))

    captions, durations, rows = [], [], []
    for segment_id in segment_ids:
        segment = layout.segments[segment_id]
        captions.append(segment.caption)
        durations.append(frames / rate)
        rows.append(timeline[segment.start_frame:segment.end_frame])

    timing_layouts = []
    next_index = len(segment_ids)
    for base_index, segment_id in enumerate(segment_ids):
        segment = layout.segments[segment_id]
        plan = segment.sub_plan
        if not use_control or plan is None or not plan.is_timing_controlled():
            continue
        timing = layout_from_plan(plan, rate, base_active_frames=frames, base_index=base_index,
                                  first_sub_index=next_index, logger=logger)
        sub_noise = SeededRng(seed).spawn(f'segment-{segment_id}-subs').normal((timing.k, frames, channels))
        for (start, end, _), plan_index, noise in zip(timing.windows, timing.plan_indices, sub_noise):
            window = plan.windows[plan_index]
            captions.append(window.recaption or " and ".join(window.events))
            durations.append((end - start) / rate)
            rows.append(noise)
        timing_layouts.append(timing)
        next_index += timing.k

    return SegmentBatch(captions=captions, durations=durations, noise=np.stack(rows),
                        base_indices=list(range(len(segment_ids))), timing_layouts=timing_layouts)


class LongformGenerator:
    def __init__(self, model, codec, sampler, config: LongformConfig = None, control_config: ControlConfig = None,
                 logger=None):
        self.model = model
        self.codec = codec
        self.sampler = sampler
        self.config = config or LongformConfig()
        self.control_config = control_config or ControlConfig()
        self.logger = logger

    def plan(self, plan: WindowPlan) -> SegmentLayout:
        layout = plan_segments(plan, self.config.max_seconds, self.config.overlap_seconds, self.codec.frame_rate)
        if layout.seg_frames > self.model.config.max_frames:
            raise LayoutError(f"Segments of {layout.seg_frames} frames exceed the model's "
                              f"{self.model.config.max_frames}")
        if not 0 <= self.config.reference_index < len(layout.segments):
            raise ConfigError(f"Reference segment {self.config.reference_index} does not exist")
        return layout

    def generate(self, plan: WindowPlan) -> LongformResult:
        layout = self.plan(plan)
        if self.logger:
            self.logger.info(f"🎼 Long-form generation: {layout}")
            self.logger.info(f"   lambda={self.config.lambda_}, compose={self.config.compose}, "
                             f"independent={self.config.independent}")
        if self.config.independent:
            latents = [self._sample_group(layout, [i], guided=False, composed=False)[0]
                       for i in range(len(layout.segments))]
        else:
            latents = self._sample_group(layout, range(len(layout.segments)), guided=True,
                                         composed=self.config.compose)

        waveforms = [self.codec.decode_model(latent) for latent in latents]
        waveform = trim_concat(waveforms, layout, self.codec.config.sample_rate)
        if self.logger:
            self.logger.info(f"✅ Long-form waveform: {len(waveform)} samples "
                             f"({len(waveform) / self.codec.config.sample_rate:.2f}s)")
        return LongformResult(waveform=waveform, layout=layout, segment_waveforms=waveforms,
                              segment_latents=latents)

    def _sample_group(self, layout: SegmentLayout, segment_ids, guided: bool, composed: bool) -> List[np.ndarray]:
        """Denoise the given segments jointly; returns their base latents"""
        segment_ids = list(segment_ids)
        batch = build_segment_batch(layout, segment_ids, self.model.config.in_channels,
                                    self.sampler.config.seed, self.config.use_control, self.logger)
        conditions = [self.model.embed_text(caption) for caption in batch.captions]

        extra = {}
        reference = self.config.reference_index
        if guided and self.config.lambda_ > 0 and reference in segment_ids and len(segment_ids) > 1:
            ref_row = segment_ids.index(reference)
            targets = [row for row in batch.base_indices if row != ref_row]
            state = ReferenceState(lambda_=self.config.lambda_, heads=self.model.config.heads)
            extra[(SELF, POST_OUTPUT)] = ReferenceGuidance(state, ref_row, targets, self.logger)

        step_callback = None
        if composed and len(segment_ids) > 1:
            def step_callback(x0, step_index, t):
                return compose_latents(x0, layout, batch.base_indices)

        controller = None
        if batch.timing_layouts or extra:
            controller = TimingController(batch.timing_layouts, self.control_config, self.logger)
            controller.install(self.sampler, self.model, extra=extra)
        try:
            latents = self.sampler.sample(self.model, conditions, batch.durations,
                                          initial_noise=batch.noise, step_callback=step_callback)
        finally:
            if controller is not None:
                controller.uninstall()
        return [latents[row, :layout.seg_frames].copy() for row in batch.base_indices]


def generate_long(plan: WindowPlan, model, codec, sampler, config: LongformConfig = None,
                  control_config: ControlConfig = None, logger=None) -> LongformResult:
    """Generate a clip longer than the model's window from a plan over [0, M']"""
    return LongformGenerator(model, codec, sampler, config, control_config, logger).generate(plan)

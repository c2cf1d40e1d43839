"""
Timing-controlled generation of one clip of at most M_max seconds
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from control.attention_control import ControlConfig, TimingController, layout_from_plan
from models.layouts import TimingLayout
from models.timing import WindowPlan
from utils.errors import DimensionError
from utils.time_grid import seconds_to_samples


@dataclass
class GenerationResult:
    waveform: np.ndarray
    base_latent: np.ndarray
    layout: Optional[TimingLayout] = None
    sub_latents: List[np.ndarray] = field(default_factory=list)
    captions: List[str] = field(default_factory=list)


def check_plan_fits(plan: WindowPlan, model):
    """Raise DimensionError when the plan is longer than the model's window"""
    if plan.total_s > model.config.max_seconds + 1e-9:
        raise DimensionError(f"Plan of {plan.total_s}s exceeds the model's {model.config.max_seconds}s; "
                             f"use long-form generation")


def batch_for_plan(plan: WindowPlan, model, frame_rate: float, base_index: int = 0, logger=None):
    """Captions, durations and layout of the 1 + k batch for a plan"""
    layout = layout_from_plan(plan, frame_rate, base_index=base_index, logger=logger)
    captions = [plan.global_caption]
    durations = [plan.total_s]
    for (start, end, _), plan_index in zip(layout.windows, layout.plan_indices):
        window = plan.windows[plan_index]
        captions.append(window.recaption or " and ".join(window.events))
        durations.append((end - start) / frame_rate)
    return captions, durations, layout


def generate_timing_controlled(plan: WindowPlan, model, codec, sampler, control_config: ControlConfig = None,
                               use_control: bool = True, logger=None) -> GenerationResult:
    """Sample the base latent (plus k sub-latents under control) and decode the base to total_s seconds"""
    control_config = control_config or ControlConfig()
    frame_rate = codec.frame_rate
    check_plan_fits(plan, model)
    num_samples = seconds_to_samples(plan.total_s, codec.config.sample_rate)

    if not use_control or not plan.is_timing_controlled():
        if logger:
            logger.info(f"🎵 Plain generation: '{plan.global_caption}' ({plan.total_s:.2f}s)")
        conditions = [model.embed_text(plan.global_caption)]
        latents = sampler.sample(model, conditions, [plan.total_s])
        base = latents[0, :model.active_lengths([plan.total_s], latents.shape[1])[0]]
        waveform = codec.decode_model(_pad_to_frames(base, codec, num_samples), num_samples)
        return GenerationResult(waveform=waveform, base_latent=base, captions=[plan.global_caption])

    captions, durations, layout = batch_for_plan(plan, model, frame_rate, logger=logger)
    if logger:
        logger.info(f"🎛️ Timing-controlled generation: base + {layout.k} sub-latents "
                    f"(alpha={control_config.alpha}, beta={control_config.beta})")
    conditions = [model.embed_text(c) for c in captions]
    controller = TimingController(layout, control_config, logger)
    controller.install(sampler, model)
    try:
        latents = sampler.sample(model, conditions, durations)
    finally:
        controller.uninstall()

    base = latents[layout.base_index, :layout.base_active_frames]
    waveform = codec.decode_model(_pad_to_frames(base, codec, num_samples), num_samples)
    subs = []
    if control_config.keep_sub_latents:
        subs = [latents[index, :end - start].copy() for start, end, index in layout.windows]
    return GenerationResult(waveform=waveform, base_latent=base, layout=layout, sub_latents=subs,
                            captions=captions)


def _pad_to_frames(latent: np.ndarray, codec, num_samples: int) -> np.ndarray:
    """Zero-pad a model-space latent so it covers num_samples"""
    needed = codec.frames_for(num_samples)
    if latent.shape[0] >= needed:
        return latent
    padded = np.zeros((needed, latent.shape[1]))
    padded[:latent.shape[0]] = latent
    return padded

"""
Segment planning, latent composition over overlaps and trim-and-concatenate.

A long clip of M' seconds is cut into segments of M_max seconds that overlap
by epsilon. Every global frame has one owner segment: an overlap is split at
its midpoint, the earlier half owned by the left segment and the later half
by the right one. Composition copies owner values into every segment holding
the frame; trimming keeps owner samples only.
"""

import math
from typing import List, Sequence

import numpy as np

from models.layouts import Segment, SegmentLayout
from models.timing import WindowPlan
from planning.window_planner import sub_plan
from utils.errors import ConfigError, DimensionError, LayoutError
from utils.time_grid import TIME_EPS, seconds_to_samples


def _whole_frames(seconds: float, frame_rate: float, name: str) -> int:
    frames = seconds * frame_rate
    if abs(frames - round(frames)) > 1e-6:
        raise ConfigError(f"{name} of {seconds}s is not a whole number of frames at {frame_rate} f/s")
    return int(round(frames))


def segment_caption(plan: WindowPlan, start_s: float, end_s: float) -> str:
    """Recaptions of the windows intersecting [start_s, end_s], deduplicated, in time order"""
    if not plan.is_timing_controlled():
        return plan.global_caption
    captions = []
    for window in plan.windows:
        if min(window.end_s, end_s) - max(window.start_s, start_s) < TIME_EPS:
            continue
        caption = window.recaption or " and ".join(window.events)
        if caption and caption not in captions:
            captions.append(caption)
    return " and ".join(captions) or plan.global_caption


def plan_segments(plan: WindowPlan, max_seconds: float, overlap_seconds: float, frame_rate: float) -> SegmentLayout:
    """Split a plan into n = ceil((M' - eps) / (M_max - eps)) overlapping segments, the last right-aligned"""
    if overlap_seconds <= 0 or overlap_seconds >= max_seconds:
        raise ConfigError(f"Overlap {overlap_seconds}s must lie in (0, {max_seconds}s)")
    seg_frames = _whole_frames(max_seconds, frame_rate, "Segment length")
    overlap_frames = _whole_frames(overlap_seconds, frame_rate, "Overlap")
    if overlap_frames % 2:
        raise ConfigError(f"Overlap of {overlap_frames} frames cannot be split in half")
    total_frames = int(math.ceil(plan.total_s * frame_rate - 1e-9))

    if total_frames <= seg_frames:
        starts = [0]
        seg_frames = total_frames
    else:
        stride = seg_frames - overlap_frames
        count = int(math.ceil((total_frames - overlap_frames) / stride))
        starts = [i * stride for i in range(count - 1)] + [total_frames - seg_frames]

    seg_len_s = seg_frames / frame_rate
    segments = []
    for index, start in enumerate(starts):
        start_s = start / frame_rate
        end_s = (start + seg_frames) / frame_rate
        caption = segment_caption(plan, start_s, end_s)
        cut = sub_plan(plan, start_s, min(end_s, plan.total_s), global_caption=caption)
        if cut.total_s < seg_len_s:
            cut.total_s = seg_len_s
            cut.windows[-1].end_s = seg_len_s
        segments.append(Segment(index=index, start_frame=start, frames=seg_frames, caption=caption,
                                frame_rate=frame_rate, sub_plan=cut))
    return SegmentLayout(total_s=plan.total_s, seg_len_s=seg_len_s, overlap_s=overlap_seconds,
                         frame_rate=frame_rate, total_frames=total_frames, segments=segments)


def compose_latents(latents: np.ndarray, layout: SegmentLayout, base_indices: Sequence[int] = None) -> np.ndarray:
    """Write each global frame's owner value into every segment holding that frame"""
    base_indices = list(range(len(layout.segments))) if base_indices is None else list(base_indices)
    if len(base_indices) != len(layout.segments):
        raise LayoutError(f"{len(base_indices)} batch indices for {len(layout.segments)} segments")
    if max(base_indices) >= latents.shape[0] or latents.shape[1] < layout.seg_frames:
        raise LayoutError(f"Batch {latents.shape} does not hold {len(layout.segments)} segments "
                          f"of {layout.seg_frames} frames")
    out = np.array(latents, dtype=np.float64, copy=True)
    if len(layout.segments) == 1:
        return out

    owners = layout.owner_map()
    segments = layout.segments
    for segment, row in zip(segments, base_indices):
        frames = np.arange(segment.start_frame, segment.end_frame)
        seg_owners = owners[frames]
        for owner in np.unique(seg_owners):
            if owner == segment.index:
                continue
            source = segments[owner]
            picked = frames[seg_owners == owner]
            out[row, picked - segment.start_frame] = latents[base_indices[owner], picked - source.start_frame]
    return out


def trim_concat(waveforms: List[np.ndarray], layout: SegmentLayout, sample_rate: int) -> np.ndarray:
    """Keep one copy of every overlap (owner samples) and concatenate to round(M' * sample_rate) samples"""
    if len(waveforms) != len(layout.segments):
        raise DimensionError(f"{len(waveforms)} decoded segments for {len(layout.segments)} planned")
    per_frame = sample_rate / layout.frame_rate
    if abs(per_frame - round(per_frame)) > 1e-9:
        raise DimensionError(f"{sample_rate} Hz is not a whole number of samples per frame")
    per_frame = int(round(per_frame))
    expected = layout.seg_frames * per_frame
    for index, waveform in enumerate(waveforms):
        if len(waveform) != expected:
            raise DimensionError(f"Segment {index} has {len(waveform)} samples, expected {expected}")

    splits = layout.split_frames() + [layout.total_frames]
    out = np.zeros(layout.total_frames * per_frame)
    for segment, waveform, lo, hi in zip(layout.segments, waveforms, splits, splits[1:]):
        local = (lo - segment.start_frame) * per_frame
        out[lo * per_frame:hi * per_frame] = waveform[local:local + (hi - lo) * per_frame]
    return out[:seconds_to_samples(layout.total_s, sample_rate)]


"""
Frame layouts used by attention control and long-form generation
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from models.timing import WindowPlan
from utils.errors import LayoutError


@dataclass
class TimingLayout:
    """Frame-space image of a window plan for one base latent and its k sub-latents.

    windows holds (start_frame, end_frame, batch_index) triples with absolute batch
    indices, so several 1 + k groups can share one batch.
    """
    frame_rate: float
    windows: List[tuple]
    base_active_frames: int
    base_index: int = 0
    plan_indices: List[int] = field(default_factory=list)

    def __post_init__(self):
        self.windows = [tuple(int(v) for v in w) for w in self.windows]
        if not self.windows:
            raise LayoutError("Timing layout has no windows")
        expected = 0
        for start, end, batch_index in self.windows:
            if start != expected or end <= start:
                raise LayoutError(f"Layout windows do not partition the active prefix at frame {start}")
            if batch_index == self.base_index:
                raise LayoutError("A sub-latent cannot share the base latent's batch index")
            expected = end
        if expected != self.base_active_frames:
            raise LayoutError(f"Windows cover {expected} frames, base has {self.base_active_frames} active")

    @property
    def k(self):
        return len(self.windows)

    def lengths(self):
        return [end - start for start, end, _ in self.windows]

    def batch_indices(self):
        return [batch_index for _, _, batch_index in self.windows]

    def check_batch(self, batch_size: int, frames: int):
        """Raise LayoutError if this layout does not fit a (batch_size, frames, ...) batch"""
        indices = [self.base_index] + self.batch_indices()
        if max(indices) >= batch_size or min(indices) < 0:
            raise LayoutError(f"Layout addresses batch index {max(indices)} in a batch of {batch_size}")
        if self.base_active_frames > frames:
            raise LayoutError(f"Layout needs {self.base_active_frames} frames, batch has {frames}")


@dataclass
class Segment:
    index: int
    start_frame: int
    frames: int
    caption: str
    frame_rate: float
    sub_plan: Optional[WindowPlan] = None

    @property
    def start_s(self):
        return self.start_frame / self.frame_rate

    @property
    def end_frame(self):
        return self.start_frame + self.frames

    @property
    def end_s(self):
        return self.end_frame / self.frame_rate


@dataclass
class SegmentLayout:
    """Decomposition of a long clip into overlapping fixed-length segments"""
    total_s: float
    seg_len_s: float
    overlap_s: float
    frame_rate: float
    total_frames: int
    segments: List[Segment]

    @property
    def seg_frames(self):
        return self.segments[0].frames

    def split_frames(self):
        """Global frame where ownership passes from segment i-1 to segment i (0 for the first)"""
        splits = [0]
        for previous, current in zip(self.segments, self.segments[1:]):
            overlap = previous.end_frame - current.start_frame
            splits.append(current.start_frame + overlap // 2)
        return splits

    def owner_map(self) -> np.ndarray:
        """For every global frame, the index of the segment whose values are kept"""
        owners = np.zeros(self.total_frames, dtype=np.int64)
        for index, split in enumerate(self.split_frames()):
            owners[split:] = index
        return owners

    def __str__(self):
        starts = ", ".join(f"{s.start_s:.2f}s" for s in self.segments)
        return (f"SegmentLayout({self.total_s:.2f}s, {len(self.segments)} x {self.seg_len_s:.2f}s, "
                f"overlap {self.overlap_s:.2f}s, starts [{starts}])")

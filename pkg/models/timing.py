"""
Timing prompts and window plans
"""

from dataclasses import dataclass, field
from typing import List

from utils.errors import PlanRangeError
from utils.time_grid import TIME_EPS


@dataclass
class TimingPrompt:
    """An event caption constrained to occur within [start_s, end_s]"""
    caption: str
    start_s: float
    end_s: float

    def __post_init__(self):
        self.caption = self.caption.strip()
        self.start_s = float(self.start_s)
        self.end_s = float(self.end_s)
        if not self.caption:
            raise PlanRangeError("Timing prompt caption is empty")
        if self.start_s < 0:
            raise PlanRangeError(f"'{self.caption}' starts before 0 ({self.start_s}s)")
        if self.start_s >= self.end_s:
            raise PlanRangeError(f"'{self.caption}' has start {self.start_s}s >= end {self.end_s}s")

    def duration(self):
        return self.end_s - self.start_s

    def __str__(self):
        return f"{self.caption} <{self.start_s:.2f},{self.end_s:.2f}>"


@dataclass
class PlanWindow:
    """One of the sequential, non-overlapping windows of a plan"""
    start_s: float
    end_s: float
    events: List[str] = field(default_factory=list)
    recaption: str = ""

    def duration(self):
        return self.end_s - self.start_s

    def is_empty(self):
        return len(self.events) == 0

    def __str__(self):
        text = self.recaption or ", ".join(self.events) or "<empty>"
        return f"<{self.start_s:.2f},{self.end_s:.2f}> {text}"


@dataclass
class WindowPlan:
    """Ordered windows partitioning [0, total_s] plus the global caption"""
    total_s: float
    windows: List[PlanWindow]
    global_caption: str

    def boundaries(self):
        return [self.windows[0].start_s] + [w.end_s for w in self.windows]

    def is_timing_controlled(self):
        """False for the degenerate single-window plan captioned with the global caption"""
        if len(self.windows) != 1:
            return True
        window = self.windows[0]
        return window.recaption.strip() != self.global_caption.strip()

    def check_invariants(self):
        """Raise PlanRangeError unless windows sort, abut exactly and cover [0, total_s]"""
        if self.total_s <= 0:
            raise PlanRangeError(f"Plan duration must be positive, got {self.total_s}")
        if not self.windows:
            raise PlanRangeError("Plan has no windows")
        if abs(self.windows[0].start_s) > TIME_EPS:
            raise PlanRangeError(f"First window starts at {self.windows[0].start_s}, not 0")
        if abs(self.windows[-1].end_s - self.total_s) > TIME_EPS:
            raise PlanRangeError(f"Last window ends at {self.windows[-1].end_s}, not {self.total_s}")
        for previous, current in zip(self.windows, self.windows[1:]):
            if previous.end_s != current.start_s:
                raise PlanRangeError(f"Windows {previous} and {current} do not abut")
        for window in self.windows:
            if window.start_s >= window.end_s:
                raise PlanRangeError(f"Window {window} is empty or reversed")
        return True

    def __str__(self):
        lines = [f"WindowPlan({self.total_s:.2f}s, '{self.global_caption}')"]
        lines.extend(f"  {w}" for w in self.windows)
        return "\n".join(lines)

"""
Timing-to-window planning: boundary collection, event assignment, gap filling
"""

import re
from typing import Dict, List

from models.timing import PlanWindow, TimingPrompt, WindowPlan
from planning.prompt_parser import parse_prompts
from planning.recaption import LLM, recaption_plan
from utils.errors import PlanRangeError
from utils.time_grid import TIME_EPS

# Separators used to split a global caption into candidate events
EVENT_SEPARATORS = re.compile(r',|;|&&|…|\.\.\.|\b(?:and|with|while|then|later)\b', re.IGNORECASE)


def build_boundaries(prompts: List[TimingPrompt], total_s: float) -> List[float]:
    """Sorted unique start/end timestamps plus 0 and total_s (merged within TIME_EPS)"""
    if total_s <= 0:
        raise PlanRangeError(f"Total duration must be positive, got {total_s}")
    for prompt in prompts:
        if prompt.start_s < -TIME_EPS or prompt.end_s > total_s + TIME_EPS:
            raise PlanRangeError(f"'{prompt.caption}' [{prompt.start_s}, {prompt.end_s}] lies outside [0, {total_s}]")

    stamps = sorted({0.0, float(total_s)}
                    | {p.start_s for p in prompts}
                    | {p.end_s for p in prompts})
    boundaries = [0.0]
    for stamp in stamps:
        if stamp - boundaries[-1] < TIME_EPS:
            continue
        boundaries.append(stamp)
    # An end stamp within TIME_EPS of total_s may have been kept in its place
    boundaries[-1] = float(total_s)
    return boundaries


def assign_window_events(boundaries: List[float], prompts: List[TimingPrompt]) -> List[PlanWindow]:
    """Windows between consecutive boundaries, each holding the captions that cover it"""
    windows = []
    for start, end in zip(boundaries, boundaries[1:]):
        events = []
        seen = set()
        for prompt in prompts:
            if prompt.start_s <= start + TIME_EPS and prompt.end_s >= end - TIME_EPS:
                key = prompt.caption.lower()
                if key not in seen:
                    seen.add(key)
                    events.append(prompt.caption)
        windows.append(PlanWindow(start_s=start, end_s=end, events=events))
    return windows


def split_caption_events(caption: str) -> List[str]:
    """Candidate events of a free-text caption"""
    parts = [p.strip(' .!?\t\n') for p in EVENT_SEPARATORS.split(caption)]
    return [re.sub(r'\s+', ' ', p) for p in parts if p]


def residual_events(global_caption: str, prompts: List[TimingPrompt]) -> List[str]:
    """Events of the global caption not consumed by any timing prompt (case-insensitive substring)"""
    captions = [p.caption.lower() for p in prompts]
    residual = []
    for fragment in split_caption_events(global_caption):
        lowered = fragment.lower()
        consumed = any(lowered in c or c in lowered for c in captions)
        if not consumed and fragment not in residual:
            residual.append(fragment)
    return residual


class DeterministicGapFiller:
    """Fills empty windows with the global caption's residual events, else the global caption"""

    def __init__(self, prompts: List[TimingPrompt] = None):
        self.prompts = list(prompts or [])

    def assignments(self, plan: WindowPlan) -> Dict[int, List[str]]:
        empty = [i for i, w in enumerate(plan.windows) if w.is_empty()]
        if not empty:
            return {}
        residual = residual_events(plan.global_caption, self.prompts)
        events = residual if residual else [plan.global_caption.strip()]
        return {i: list(events) for i in empty}


def fill_gaps(plan: WindowPlan, filler=None, logger=None) -> WindowPlan:
    """Return a plan in which no window has an empty event list"""
    filler = filler or DeterministicGapFiller()
    assignments = filler.assignments(plan)
    windows = []
    for index, window in enumerate(plan.windows):
        events = list(window.events)
        if not events:
            events = list(assignments.get(index) or [plan.global_caption.strip()])
            if logger:
                logger.debug(f"Filled gap <{window.start_s:.2f},{window.end_s:.2f}> with {events}")
        windows.append(PlanWindow(start_s=window.start_s, end_s=window.end_s,
                                  events=events, recaption=window.recaption))
    return WindowPlan(total_s=plan.total_s, windows=windows, global_caption=plan.global_caption)


def sub_plan(plan: WindowPlan, start_s: float, end_s: float, global_caption: str = None) -> WindowPlan:
    """Cut a plan to [start_s, end_s] and rebase it at 0; windows crossing the cut are split"""
    if not 0 <= start_s < end_s <= plan.total_s + TIME_EPS:
        raise PlanRangeError(f"Cannot cut [{start_s}, {end_s}] from a {plan.total_s}s plan")
    windows = []
    for window in plan.windows:
        lo = max(window.start_s, start_s)
        hi = min(window.end_s, end_s)
        if hi - lo < TIME_EPS:
            continue
        windows.append(PlanWindow(start_s=lo - start_s, end_s=hi - start_s,
                                  events=list(window.events), recaption=window.recaption))
    windows[0].start_s = 0.0
    windows[-1].end_s = end_s - start_s
    return WindowPlan(total_s=end_s - start_s, windows=windows,
                      global_caption=global_caption if global_caption is not None else plan.global_caption)


def make_plan(y_c: str, raw_timing: str, total_s: float, mode='template', client=None, logger=None) -> WindowPlan:
    """Parse timing prompts, build and fill the windows, then recaption each window.

    With no timing prompts the plan is a single window [0, total_s] captioned y_c.
    """
    mode = getattr(mode, 'value', mode)
    prompts = parse_prompts(raw_timing or "")
    if not prompts:
        caption = y_c.strip()
        plan = WindowPlan(total_s=float(total_s),
                          windows=[PlanWindow(0.0, float(total_s), events=[caption], recaption=caption)],
                          global_caption=caption)
        plan.check_invariants()
        return plan

    boundaries = build_boundaries(prompts, total_s)
    plan = WindowPlan(total_s=float(total_s), windows=assign_window_events(boundaries, prompts),
                      global_caption=y_c.strip())
    if mode == LLM and client is not None:
        filler = client.gap_filler(prompts)
    else:
        filler = DeterministicGapFiller(prompts)
    plan = fill_gaps(plan, filler, logger)
    plan = recaption_plan(plan, mode, client, logger)
    plan.check_invariants()
    if logger:
        logger.log_plan(plan)
    return plan

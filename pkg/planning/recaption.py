"""
Window recaptioning: template mode and LLM mode
"""

from typing import List

from models.timing import PlanWindow, WindowPlan

TEMPLATE = 'template'
LLM = 'llm'


def template_recaption(events: List[str]) -> str:
    """Join events as "E1", "E1 while E2" or "E1 while E2 and E3 ..." """
    events = [e.strip() for e in events if e and e.strip()]
    if not events:
        return ""
    if len(events) == 1:
        return events[0]
    return events[0] + " while " + " and ".join(events[1:])


def recaption_window(window: PlanWindow, y_c: str, mode: str = TEMPLATE, client=None, logger=None) -> PlanWindow:
    """Return a copy of the window with its recaption filled in.

    LLM failures never abort: the client falls back to the template rule.
    """
    mode = getattr(mode, 'value', mode)
    if mode == LLM and client is not None:
        text = client.recaption(window.events, y_c, window)
    else:
        text = template_recaption(window.events)
    if not text.strip():
        text = template_recaption(window.events) or y_c.strip()
    if logger:
        logger.debug(f"Recaption <{window.start_s:.2f},{window.end_s:.2f}> -> {text}")
    return PlanWindow(start_s=window.start_s, end_s=window.end_s, events=list(window.events), recaption=text)


def recaption_plan(plan: WindowPlan, mode: str = TEMPLATE, client=None, logger=None) -> WindowPlan:
    windows = [recaption_window(w, plan.global_caption, mode, client, logger) for w in plan.windows]
    return WindowPlan(total_s=plan.total_s, windows=windows, global_caption=plan.global_caption)

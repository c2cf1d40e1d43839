"""
Plan files: JSON documents with a fixed key order
"""

import json
from pathlib import Path

from models.timing import PlanWindow, WindowPlan
from utils.errors import PlanFileError, PlanRangeError


def plan_to_dict(plan: WindowPlan) -> dict:
    return {
        'total_s': plan.total_s,
        'global_caption': plan.global_caption,
        'windows': [
            {
                'start_s': w.start_s,
                'end_s': w.end_s,
                'events': list(w.events),
                'recaption': w.recaption,
            }
            for w in plan.windows
        ],
    }


def plan_from_dict(data: dict) -> WindowPlan:
    try:
        windows = [
            PlanWindow(start_s=float(w['start_s']), end_s=float(w['end_s']),
                       events=[str(e) for e in w['events']], recaption=str(w.get('recaption', '')))
            for w in data['windows']
        ]
        plan = WindowPlan(total_s=float(data['total_s']), windows=windows,
                          global_caption=str(data['global_caption']))
    except (KeyError, TypeError, ValueError) as e:
        raise PlanFileError(f"Malformed plan document: {e}")
    try:
        plan.check_invariants()
    except PlanRangeError as e:
        raise PlanFileError(f"Plan file violates plan invariants: {e}")
    for window in plan.windows:
        if not window.events or not window.recaption.strip():
            raise PlanFileError(f"Plan window {window} has no events or no recaption")
    return plan


def save_plan(plan: WindowPlan, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(plan_to_dict(plan), indent=2, ensure_ascii=False) + "\n", encoding='utf-8')
    return path


def load_plan(path) -> WindowPlan:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Plan file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding='utf-8'))
    except json.JSONDecodeError as e:
        raise PlanFileError(f"Plan file {path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise PlanFileError(f"Plan file {path} must hold a JSON object")
    return plan_from_dict(data)

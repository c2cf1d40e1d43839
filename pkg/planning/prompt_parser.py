"""
Tolerant parser for timing prompts.

Accepts loosely formatted entries such as
    Frying. <0.0,8.0>
    Dog bakring. 0s-4s.
    Alarm ringing. From 8 to 10.
    Woman speaking. 8~10 sec.
separated by commas or newlines (commas inside <...> do not separate).
"""

import re
from typing import List

from models.timing import TimingPrompt
from utils.errors import PlanParseError, PlanRangeError

NUM = r'(\d+(?:\.\d+)?)'
UNIT = r'(?:\s*(?:seconds|second|secs|sec|s)\b\.?)?'

# Tried in order; the first pattern found in an entry wins
INTERVAL_PATTERNS = [
    ('angle', re.compile(r'<\s*' + NUM + r'\s*,\s*' + NUM + r'\s*>')),
    ('from_to', re.compile(r'\bfrom\s+' + NUM + UNIT + r'\s+to\s+' + NUM + UNIT, re.IGNORECASE)),
    ('tilde', re.compile(NUM + UNIT + r'\s*[~∼〜]\s*' + NUM + UNIT, re.IGNORECASE)),
    ('range', re.compile(NUM + UNIT + r'\s*(?:-|–|—|\bto\b)\s*' + NUM + UNIT, re.IGNORECASE)),
]

LOCATIVE_WORDS = ('at', 'from', 'during', 'between', 'in')
EDGE_PUNCTUATION = ' \t.,;:!?-–—'


def split_entries(raw: str) -> List[str]:
    """Split on commas and newlines that are not inside <...>"""
    entries = []
    depth = 0
    current = []
    for char in raw:
        if char == '<':
            depth += 1
        elif char == '>':
            depth = max(0, depth - 1)
        if char in ',\n' and depth == 0:
            entries.append(''.join(current))
            current = []
        else:
            current.append(char)
    entries.append(''.join(current))
    return [e.strip() for e in entries if e.strip(EDGE_PUNCTUATION)]


def clean_caption(text: str) -> str:
    """Collapse whitespace and strip edge punctuation and trailing locative words"""
    caption = re.sub(r'\s+', ' ', text).strip(EDGE_PUNCTUATION)
    while True:
        words = caption.split(' ')
        if len(words) > 1 and words[-1].lower() in LOCATIVE_WORDS:
            caption = ' '.join(words[:-1]).strip(EDGE_PUNCTUATION)
            continue
        return caption


def parse_entry(entry: str) -> TimingPrompt:
    """Parse one entry into a TimingPrompt"""
    for _, pattern in INTERVAL_PATTERNS:
        match = pattern.search(entry)
        if match is None:
            continue
        start_s, end_s = float(match.group(1)), float(match.group(2))
        caption = clean_caption(entry[:match.start()] + ' ' + entry[match.end():])
        if not caption:
            raise PlanParseError(entry, f"Entry has an interval but no caption: {entry!r}")
        if start_s >= end_s:
            raise PlanRangeError(f"Entry {entry!r}: start {start_s}s is not before end {end_s}s")
        return TimingPrompt(caption=caption, start_s=start_s, end_s=end_s)
    raise PlanParseError(entry)


def parse_prompts(raw: str) -> List[TimingPrompt]:
    """Parse a block of timing prompts; an empty block yields no prompts"""
    if raw is None:
        return []
    return [parse_entry(entry) for entry in split_entries(raw)]


def format_prompts(prompts: List[TimingPrompt]) -> str:
    """Render prompts in the angle-bracket form parse_prompts reads back"""
    return ", ".join(f"{p.caption}<{p.start_s:g},{p.end_s:g}>" for p in prompts)

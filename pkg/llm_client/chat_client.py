"""
Chat-completion client for LLM planning and recaptioning.

Responses are untrusted: every answer passes validation before it reaches a
plan, and failures fall back to the deterministic planner when allowed.
"""

import json
import os
import re
import time
from dataclasses import dataclass
from pathlib import Path
from string import Template
from typing import Dict, List, Optional

import requests

from models.timing import PlanWindow, WindowPlan
from planning.recaption import template_recaption
from planning.window_planner import DeterministicGapFiller
from utils.config import API_KEY_ENV
from utils.errors import ConfigError, LlmError
from utils.rate_limiter import RateLimiter, make_rate_limited_request

PROMPT_DIR = Path(__file__).parent / 'prompts'
MAX_RECAPTION_CHARS = 200

TIMESTAMP_PATTERN = re.compile(
    r'\d+(?:\.\d+)?\s*(?:s|sec|secs|second|seconds|ms)\b|\b\d{1,2}:\d{2}\b|<\s*\d', re.IGNORECASE)
SENTENCE_BREAK = re.compile(r'[.!?]\s+\S')


@dataclass
class LlmConfig:
    base_url: str = 'http://localhost:8000/v1'
    model: str = 'gpt-4o'
    api_key_env: str = API_KEY_ENV
    timeout_s: float = 30.0
    max_retries: int = 2
    backoff_s: float = 0.5
    rate_limit_backoff_s: float = 2.0
    fallback: bool = True
    prompt_version: str = 'v1'

    def __post_init__(self):
        if self.timeout_s <= 0:
            raise ConfigError("LLM timeout must be positive")
        if self.max_retries < 0:
            raise ConfigError("LLM max_retries must be non-negative")

    def api_key(self) -> Optional[str]:
        return os.getenv(self.api_key_env)


def load_prompt(name: str, version: str = 'v1') -> Template:
    path = PROMPT_DIR / f"{name}_{version}.txt"
    if not path.exists():
        raise FileNotFoundError(f"Prompt template not found: {path}")
    return Template(path.read_text(encoding='utf-8'))


def validate_recaption(text: str) -> Optional[str]:
    """Cleaned recaption, or None if it is empty, too long, timed or more than one sentence"""
    if not isinstance(text, str):
        return None
    cleaned = re.sub(r'\s+', ' ', text).strip().strip('"\'').strip()
    if not cleaned or len(cleaned) > MAX_RECAPTION_CHARS:
        return None
    if TIMESTAMP_PATTERN.search(cleaned) or SENTENCE_BREAK.search(cleaned):
        return None
    return cleaned


def parse_assignments(content: str, plan: WindowPlan) -> Dict[int, List[str]]:
    """Validate a gap-planning answer; raises LlmError on anything but assignments to empty windows"""
    text = content.strip()
    fenced = re.match(r'^```(?:json)?\s*(.*?)\s*```$', text, re.DOTALL)
    if fenced:
        text = fenced.group(1)
    try:
        document = json.loads(text)
    except ValueError as e:
        raise LlmError(f"Gap plan is not JSON: {e}")
    if not isinstance(document, dict) or not isinstance(document.get('assignments'), list):
        raise LlmError("Gap plan lacks an 'assignments' list")

    empty = {i for i, w in enumerate(plan.windows) if w.is_empty()}
    result = {}
    for item in document['assignments']:
        if not isinstance(item, dict):
            raise LlmError(f"Malformed assignment: {item!r}")
        window, events = item.get('window'), item.get('events')
        if isinstance(window, bool) or not isinstance(window, int) or window not in empty:
            raise LlmError(f"Assignment targets window {window!r}, which is not an empty window")
        if window in result:
            raise LlmError(f"Window {window} assigned twice")
        if not isinstance(events, list) or not events or \
                not all(isinstance(e, str) and e.strip() for e in events):
            raise LlmError(f"Window {window} has no usable events: {events!r}")
        result[window] = [e.strip() for e in events]
    return result


class ChatClient:
    def __init__(self, config: LlmConfig = None, session=None, logger=None, limiter: RateLimiter = None,
                 sleep=time.sleep):
        self.config = config or LlmConfig()
        self.session = session if session is not None else requests.Session()
        self.logger = logger
        self.limiter = limiter
        self.sleep = sleep
        self.requests_made = 0

    def _headers(self):
        headers = {'Content-Type': 'application/json'}
        key = self.config.api_key()
        if key:
            headers['Authorization'] = f"Bearer {key}"
        return headers

    def complete(self, messages: List[dict], max_attempts: int = None) -> str:
        """POST a chat completion and return choices[0].message.content, retrying with backoff

        max_attempts caps the requests made by this call (default max_retries + 1).
        """
        attempts = self.config.max_retries + 1 if max_attempts is None else max(1, max_attempts)
        url = f"{self.config.base_url.rstrip('/')}/chat/completions"
        body = {'model': self.config.model, 'messages': messages, 'temperature': 0}
        last_error = None
        for attempt in range(attempts):
            if attempt:
                wait = self.config.backoff_s * 2 ** (attempt - 1)
                if isinstance(last_error, _RateLimited):
                    wait = max(wait, self.config.rate_limit_backoff_s * 2 ** (attempt - 1))
                if self.logger:
                    self.logger.debug(f"Retrying chat completion in {wait:.2f}s ({last_error})")
                self.sleep(wait)
            try:
                self.requests_made += 1
                response = make_rate_limited_request(self.session, 'POST', url, self.limiter, self.logger,
                                                     json=body, headers=self._headers(),
                                                     timeout=self.config.timeout_s)
            except requests.RequestException as e:
                last_error = e
                continue

            if response.status_code == 429:
                last_error = _RateLimited(f"HTTP 429 from {url}")
                continue
            if response.status_code >= 500:
                last_error = LlmError(f"HTTP {response.status_code} from {url}")
                continue
            if response.status_code >= 400:
                raise LlmError(f"HTTP {response.status_code} from {url}: {response.text[:200]}")
            try:
                return response.json()['choices'][0]['message']['content']
            except (ValueError, KeyError, IndexError, TypeError) as e:
                last_error = LlmError(f"Unexpected chat completion body: {e}")
        raise LlmError(f"Chat completion failed after {attempts} attempts: {last_error}")

    def _fallback(self, message: str, error: Exception):
        if not self.config.fallback:
            raise error if isinstance(error, LlmError) else LlmError(f"{message}: {error}")
        if self.logger:
            self.logger.warning(f"⚠️ {message}, using the deterministic fallback: {error}")

    # Recaption

    def recaption(self, events: List[str], y_c: str, window: PlanWindow = None) -> str:
        """One-sentence caption for a window's events; template caption on failure when fallback is on"""
        template = load_prompt('recaption', self.config.prompt_version)
        prompt = template.substitute(
            caption=y_c, events=", ".join(events),
            start=f"{window.start_s:.2f}" if window else "0.00",
            end=f"{window.end_s:.2f}" if window else "?")
        messages = [{'role': 'user', 'content': prompt}]
        # Transport retries and re-asks after failed validation share one request budget
        error = None
        budget = self.config.max_retries + 1
        while budget > 0:
            before = self.requests_made
            try:
                text = validate_recaption(self.complete(messages, max_attempts=budget))
            except LlmError as e:
                error = e
                break
            if text is not None:
                return text
            error = LlmError("Recaption failed validation")
            budget -= max(1, self.requests_made - before)
        self._fallback("Recaption unavailable", error)
        return template_recaption(events)

    # Gap planning

    def plan_gaps(self, plan: WindowPlan, y_c: str = None, prompts=None) -> Dict[int, List[str]]:
        """Event assignments for the plan's empty windows only"""
        empty = [i for i, w in enumerate(plan.windows) if w.is_empty()]
        if not empty:
            return {}
        fallback = DeterministicGapFiller(prompts)
        listing = "\n".join(
            f"  [{i}] {w.start_s:.2f}-{w.end_s:.2f} s: {', '.join(w.events) if w.events else '(empty)'}"
            for i, w in enumerate(plan.windows))
        prompt = load_prompt('plan_gaps', self.config.prompt_version).substitute(
            caption=y_c or plan.global_caption, duration=f"{plan.total_s:g}", windows=listing)
        try:
            assignments = parse_assignments(self.complete([{'role': 'user', 'content': prompt}]), plan)
        except LlmError as e:
            self._fallback("Gap plan rejected", e)
            return fallback.assignments(plan)
        missing = [i for i in empty if i not in assignments]
        if missing:
            deterministic = fallback.assignments(plan)
            assignments.update({i: deterministic[i] for i in missing})
        return assignments

    def gap_filler(self, prompts=None) -> 'LlmGapFiller':
        return LlmGapFiller(self, prompts)


class LlmGapFiller:
    """Gap filler backed by the chat client, same interface as DeterministicGapFiller"""

    def __init__(self, client: ChatClient, prompts=None):
        self.client = client
        self.prompts = list(prompts or [])

    def assignments(self, plan: WindowPlan) -> Dict[int, List[str]]:
        return self.client.plan_gaps(plan, plan.global_caption, self.prompts)


class _RateLimited(LlmError):
    pass

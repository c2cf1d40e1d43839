"""
Rate limiter for chat-completion calls made by the LLM planner
"""

import time
from typing import Any, Callable, List


class RateLimiter:
    """Sliding-window limiter: at most max_requests calls per time_window seconds.

    clock and sleep are injectable so tests can run on a fake timeline.
    """

    def __init__(self, max_requests: int = 5, time_window: float = 1.0,
                 clock: Callable[[], float] = time.monotonic, sleep: Callable[[float], None] = time.sleep):
        self.max_requests = max_requests
        self.time_window = time_window
        self.clock = clock
        self.sleep = sleep
        self.requests: List[float] = []

    def wait_if_needed(self, logger=None) -> float:
        """Block until a slot is free, record the request, return seconds waited"""
        now = self.clock()
        self.requests = [stamp for stamp in self.requests if now - stamp < self.time_window]

        waited = 0.0
        if len(self.requests) >= self.max_requests:
            wait_time = self.time_window - (now - min(self.requests))
            if wait_time > 0:
                if logger:
                    logger.debug(f"⏳ LLM rate limit reached, sleeping {wait_time:.2f}s")
                self.sleep(wait_time)
                waited = wait_time
                now = self.clock()

        self.requests.append(now)
        return waited


# Shared limiter for the chat-completion endpoint
llm_rate_limiter = RateLimiter(max_requests=5, time_window=1.0)


def make_rate_limited_request(session, method: str, url: str, limiter: RateLimiter = None,
                              logger=None, **kwargs) -> Any:
    """Send GET/POST through session after waiting on limiter (the shared LLM limiter by default)"""
    (limiter or llm_rate_limiter).wait_if_needed(logger)

    verb = method.upper()
    if verb not in ('GET', 'POST'):
        raise ValueError(f"Unsupported HTTP method: {method}")
    send = session.get if verb == 'GET' else session.post
    return send(url, **kwargs)

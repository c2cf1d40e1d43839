"""
Time-grid helpers: snapping seconds to grids and seconds <-> latent frames
"""

import math

TIME_EPS = 1e-6


def snap_to_grid(value, step=0.1):
    """Round a value to the nearest multiple of step (e.g. 0.1 s annotation grid)"""
    return round(round(value / step) * step, 10)


def round_half_up(value):
    """Round to the nearest integer, halves going up"""
    return int(math.floor(value + 0.5))


def seconds_to_frames(seconds, frame_rate):
    """Frame index of a timestamp (round-half-up)"""
    return round_half_up(seconds * frame_rate)


def frames_to_seconds(frames, frame_rate):
    """Timestamp of a frame boundary"""
    return frames / frame_rate


def seconds_to_samples(seconds, sample_rate):
    """Sample count of a duration (round-half-up)"""
    return round_half_up(seconds * sample_rate)


def nearly_equal(a, b, tol=TIME_EPS):
    """Check if two timestamps are within the merge tolerance"""
    return abs(a - b) < tol

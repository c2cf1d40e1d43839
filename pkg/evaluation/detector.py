"""
Oracle band-energy event detector for the synthetic vocabulary
"""

from dataclasses import dataclass
from typing import List

import numpy as np

from evaluation.features import band_amplitudes
from models.events import DEFAULT_EVENT_CLASSES, EventAnnotation, EventClass


@dataclass
class DetectorConfig:
    hop_s: float = 0.05
    window_s: float = 0.1
    abs_threshold: float = 0.05
    rel_threshold: float = 0.1
    release_ratio: float = 0.5
    min_gap_s: float = 0.1
    min_event_s: float = 0.2


def hysteresis_runs(envelope: np.ndarray, on: float, off: float) -> List[tuple]:
    """(first, last) frame indices of runs switched on at >= on and off below off"""
    runs = []
    active = False
    first = 0
    for index, value in enumerate(envelope):
        if not active and value >= on:
            active, first = True, index
        elif active and value < off:
            runs.append((first, index - 1))
            active = False
    if active:
        runs.append((first, len(envelope) - 1))
    return runs


def detect_events(waveform, sample_rate: int = 4000, classes: List[EventClass] = None,
                  config: DetectorConfig = None) -> List[EventAnnotation]:
    """Threshold every class band's amplitude envelope; events sorted by onset then name"""
    classes = classes or DEFAULT_EVENT_CLASSES
    config = config or DetectorConfig()
    waveform = np.asarray(waveform, dtype=np.float64).reshape(-1)
    duration = waveform.size / sample_rate
    hop = int(round(config.hop_s * sample_rate))
    n_fft = int(round(config.window_s * sample_rate))
    amplitudes = band_amplitudes(waveform, sample_rate, classes, n_fft=n_fft, hop=hop)
    on = max(config.abs_threshold, config.rel_threshold * float(amplitudes.max(initial=0.0)))
    off = on * config.release_ratio
    half_hop = config.hop_s / 2.0

    events = []
    for index, event_class in enumerate(classes):
        spans = []
        for first, last in hysteresis_runs(amplitudes[:, index], on, off):
            onset = max(0.0, first * config.hop_s - half_hop)
            offset = min(duration, last * config.hop_s + half_hop)
            if spans and onset - spans[-1][1] < config.min_gap_s:
                spans[-1] = (spans[-1][0], offset)
            else:
                spans.append((onset, offset))
        for onset, offset in spans:
            if offset - onset >= config.min_event_s:
                events.append(EventAnnotation(event_class, round(onset, 6), round(offset, 6)))
    events.sort(key=lambda e: (e.onset_s, e.name))
    return events

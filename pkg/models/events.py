"""
Synthetic sound-event vocabulary.

Each class owns two cosine-transform bins of the codec (bin spacing
sample_rate / (2 * frame_size) = 12.5 Hz at the default geometry) and a
frequency band around them. Bands of distinct classes are disjoint.
"""

from dataclasses import dataclass
from typing import List, Optional

from utils.errors import ConfigError

BURST = 'burst'
SUSTAINED = 'sustained'

# Relative amplitudes of the two tones that make up an event (unit band amplitude)
TONE_WEIGHTS = (0.8, 0.6)


@dataclass(frozen=True)
class EventClass:
    name: str
    bins: tuple
    band: tuple
    envelope: str

    def tokens(self):
        return self.name.lower().split()


@dataclass
class EventAnnotation:
    event_class: EventClass
    onset_s: float
    offset_s: float

    def __post_init__(self):
        if self.onset_s >= self.offset_s:
            raise ConfigError(f"Annotation onset {self.onset_s} >= offset {self.offset_s}")

    @property
    def name(self):
        return self.event_class.name

    def duration(self):
        return self.offset_s - self.onset_s

    def __str__(self):
        return f"{self.name} [{self.onset_s:.2f}s - {self.offset_s:.2f}s]"


EVENT_NAMES = [
    ("frying", SUSTAINED),
    ("dog barking", BURST),
    ("running water", SUSTAINED),
    ("alarm ringing", BURST),
    ("woman speaking", BURST),
    ("owl hooting", BURST),
    ("crickets chirping", BURST),
    ("engine humming", SUSTAINED),
]

CONNECTIVES = ["while", "and", "with", "a", "the", "in", "background", "then"]


def build_event_classes(bin_spacing_hz: float = 12.5, first_bin: int = 8, bin_step: int = 8) -> List[EventClass]:
    """Event classes laid out on the codec's transform bins"""
    classes = []
    for index, (name, envelope) in enumerate(EVENT_NAMES):
        k = first_bin + bin_step * index
        band = (bin_spacing_hz * (k - 1), bin_spacing_hz * (k + 3))
        classes.append(EventClass(name=name, bins=(k, k + 2), band=band, envelope=envelope))
    return classes


DEFAULT_EVENT_CLASSES = build_event_classes()


def model_bins(classes: List[EventClass] = None) -> tuple:
    """Transform bins carried into the model's latent space, class by class"""
    classes = classes or DEFAULT_EVENT_CLASSES
    return tuple(b for event_class in classes for b in event_class.bins)


def find_class(name: str, classes: List[EventClass] = None) -> Optional[EventClass]:
    """Look up an event class by case-insensitive name"""
    wanted = name.strip().lower()
    for event_class in classes or DEFAULT_EVENT_CLASSES:
        if event_class.name == wanted:
            return event_class
    return None


def classes_in_caption(caption: str, classes: List[EventClass] = None) -> List[EventClass]:
    """Event classes whose names occur in a caption, in vocabulary order"""
    lowered = caption.lower()
    return [c for c in classes or DEFAULT_EVENT_CLASSES if c.name in lowered]


def vocabulary(classes: List[EventClass] = None) -> List[str]:
    """Word vocabulary of the toy text encoder (event words first, then connectives)"""
    words = []
    for event_class in classes or DEFAULT_EVENT_CLASSES:
        for token in event_class.tokens():
            if token not in words:
                words.append(token)
    for token in CONNECTIVES:
        if token not in words:
            words.append(token)
    return words

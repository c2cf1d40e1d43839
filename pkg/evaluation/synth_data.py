"""
Synthetic sound-event clips with ground-truth annotations.

Every event is two tones at its class's transform-bin frequencies; the
half-sample phase offset makes each tone coincide with the codec's basis
vector inside every block. Shards are directories with the WAV files,
clips.csv (clip_id, path, caption, duration_s) and annotations.csv
(clip_id, class, onset_s, offset_s).
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import List

import numpy as np
import pandas as pd

from codec.wav_io import read_wav, write_wav
from diffusion.trainer import TrainingExample
from models.events import BURST, DEFAULT_EVENT_CLASSES, TONE_WEIGHTS, EventAnnotation, EventClass, find_class
from numerics.rng import SeededRng
from planning.recaption import template_recaption
from utils.errors import ConfigError, DimensionError
from utils.time_grid import snap_to_grid

GRID_S = 0.1
PEAK_LIMIT = 0.99

CLIPS_FILE = 'clips.csv'
ANNOTATIONS_FILE = 'annotations.csv'


@dataclass
class SynthClip:
    clip_id: str
    waveform: np.ndarray
    caption: str
    annotations: List[EventAnnotation] = field(default_factory=list)
    duration_s: float = 10.0


def event_waveform(event_class: EventClass, onset_s: float, offset_s: float, amplitude: float,
                   num_samples: int, sample_rate: int, frame_size: int = 160) -> np.ndarray:
    """Two-tone event gated to [onset_s, offset_s)"""
    n = np.arange(num_samples)
    spacing = sample_rate / (2.0 * frame_size)
    signal = np.zeros(num_samples)
    for weight, k in zip(TONE_WEIGHTS, event_class.bins):
        signal += weight * np.cos(2.0 * np.pi * k * spacing * (n + 0.5) / sample_rate)
    gate = (n >= int(round(onset_s * sample_rate))) & (n < int(round(offset_s * sample_rate)))
    return amplitude * signal * gate


def _draw_interval(rng: SeededRng, event_class: EventClass, duration_s: float):
    if event_class.envelope == BURST:
        length = snap_to_grid(rng.uniform(0.5, 2.0), GRID_S)
    else:
        length = snap_to_grid(rng.uniform(min(3.0, duration_s), duration_s), GRID_S)
    length = min(max(length, 0.5), duration_s)
    onset = snap_to_grid(rng.uniform(0.0, duration_s - length), GRID_S)
    offset = min(snap_to_grid(onset + length, GRID_S), duration_s)
    return onset, offset


def synth_clip(clip_id: str, rng: SeededRng, classes: List[EventClass], duration_s: float = 10.0,
               sample_rate: int = 4000, frame_size: int = 160) -> SynthClip:
    """Overlay 1-3 distinct events; caption lists them in onset order"""
    num_samples = int(round(duration_s * sample_rate))
    count = int(rng.integers(1, min(3, len(classes)) + 1))
    picked = [classes[int(i)] for i in rng.choice(len(classes), size=count, replace=False)]

    waveform = np.zeros(num_samples)
    annotations = []
    for event_class in picked:
        onset, offset = _draw_interval(rng, event_class, duration_s)
        amplitude = float(rng.uniform(0.15, 0.25))
        waveform += event_waveform(event_class, onset, offset, amplitude, num_samples, sample_rate, frame_size)
        annotations.append(EventAnnotation(event_class, onset, offset))

    peak = np.max(np.abs(waveform))
    if peak > PEAK_LIMIT:
        waveform *= PEAK_LIMIT / peak
    annotations.sort(key=lambda a: (a.onset_s, a.name))
    caption = template_recaption([a.name for a in annotations])
    return SynthClip(clip_id=clip_id, waveform=waveform, caption=caption, annotations=annotations,
                     duration_s=duration_s)


def synth_dataset(classes: List[EventClass] = None, n: int = 20, seed: int = 0, duration_s: float = 10.0,
                  sample_rate: int = 4000, frame_size: int = 160, logger=None) -> List[SynthClip]:
    """n clips, deterministic in seed"""
    classes = list(classes or DEFAULT_EVENT_CLASSES)
    if len(classes) < 2:
        raise ConfigError("Synthetic datasets need at least 2 event classes")
    rng = SeededRng(seed).spawn('synth-dataset')
    clips = [synth_clip(f"clip_{i:04d}", rng, classes, duration_s, sample_rate, frame_size) for i in range(n)]
    if logger:
        logger.info(f"🎲 Synthesized {n} clips of {duration_s:.1f}s (seed {seed})")
    return clips


# Shards

def write_shard(clips: List[SynthClip], directory, sample_rate: int = 4000, logger=None) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    clip_rows, annotation_rows = [], []
    for clip in clips:
        path = f"{clip.clip_id}.wav"
        write_wav(directory / path, clip.waveform, sample_rate)
        clip_rows.append({'clip_id': clip.clip_id, 'path': path, 'caption': clip.caption,
                          'duration_s': clip.duration_s})
        for a in clip.annotations:
            annotation_rows.append({'clip_id': clip.clip_id, 'class': a.name,
                                    'onset_s': a.onset_s, 'offset_s': a.offset_s})
    pd.DataFrame(clip_rows, columns=['clip_id', 'path', 'caption', 'duration_s']).to_csv(
        directory / CLIPS_FILE, index=False)
    pd.DataFrame(annotation_rows, columns=['clip_id', 'class', 'onset_s', 'offset_s']).to_csv(
        directory / ANNOTATIONS_FILE, index=False)
    if logger:
        logger.info(f"💾 Wrote shard {directory} ({len(clips)} clips, {len(annotation_rows)} events)")
    return directory


def read_shard(directory, sample_rate: int = 4000) -> List[SynthClip]:
    directory = Path(directory)
    clips_path = directory / CLIPS_FILE
    if not clips_path.exists():
        raise FileNotFoundError(f"Shard index not found: {clips_path}")
    clips_df = pd.read_csv(clips_path)
    annotations_df = pd.read_csv(directory / ANNOTATIONS_FILE)
    grouped = {clip_id: rows for clip_id, rows in annotations_df.groupby('clip_id')}

    clips = []
    for row in clips_df.itertuples(index=False):
        annotations = []
        rows = grouped[row.clip_id].to_dict('records') if row.clip_id in grouped else []
        for a in rows:
            event_class = find_class(a['class'])
            if event_class is None:
                raise DimensionError(f"Unknown event class '{a['class']}' in {directory}")
            annotations.append(EventAnnotation(event_class, float(a['onset_s']), float(a['offset_s'])))
        clips.append(SynthClip(clip_id=row.clip_id, waveform=read_wav(directory / row.path, sample_rate),
                               caption=row.caption, annotations=annotations, duration_s=float(row.duration_s)))
    return clips


def examples_from_shard(shard, codec) -> list:
    """Training examples (model-space latents) for every clip of a shard"""
    return [TrainingExample(latent=codec.encode_model(clip.waveform), caption=clip.caption,
                            duration_s=clip.duration_s)
            for clip in read_shard(shard, codec.config.sample_rate)]

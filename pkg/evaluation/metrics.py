"""
Timing, distribution and consistency metrics.

Eb: event-based F1, micro over classes; a hypothesis matches a same-class
reference when the onset error is within the collar and the offset error
within max(collar, 0.2 * reference duration). At: clip-level presence F1
per class, macro-averaged over the classes present in the references.
"""

from dataclasses import dataclass
from itertools import combinations
from typing import List, Sequence

import numpy as np
from scipy import linalg

from evaluation.features import band_amplitudes, window_features
from models.events import DEFAULT_EVENT_CLASSES, EventAnnotation, classes_in_caption
from utils.errors import DimensionError

COLLAR_S = 0.2
OFFSET_RATIO = 0.2
RIDGE = 1e-6


# Timing metrics

def match_events(ref: Sequence[EventAnnotation], hyp: Sequence[EventAnnotation], collar_s: float = COLLAR_S) -> int:
    """Greedy one-to-one matching in onset order; returns the number of matched pairs"""
    used = set()
    hyp_sorted = sorted(range(len(hyp)), key=lambda i: (hyp[i].onset_s, hyp[i].name))
    matched = 0
    for r in sorted(ref, key=lambda a: (a.onset_s, a.name)):
        offset_tolerance = max(collar_s, OFFSET_RATIO * r.duration())
        for i in hyp_sorted:
            h = hyp[i]
            if i in used or h.name != r.name:
                continue
            if abs(h.onset_s - r.onset_s) <= collar_s and abs(h.offset_s - r.offset_s) <= offset_tolerance:
                used.add(i)
                matched += 1
                break
    return matched


def _f1(true_positives: int, n_ref: int, n_hyp: int) -> float:
    if n_ref == 0 and n_hyp == 0:
        return 1.0
    return 2.0 * true_positives / (n_ref + n_hyp)


def eb_score(ref: Sequence[EventAnnotation], hyp: Sequence[EventAnnotation], collar_s: float = COLLAR_S) -> float:
    return _f1(match_events(ref, hyp, collar_s), len(ref), len(hyp))


def eb_score_dataset(refs: Sequence[Sequence[EventAnnotation]], hyps: Sequence[Sequence[EventAnnotation]],
                     collar_s: float = COLLAR_S) -> float:
    """Micro F1 pooled over all clips"""
    if len(refs) != len(hyps):
        raise DimensionError(f"{len(refs)} reference clips vs {len(hyps)} hypothesis clips")
    tp = sum(match_events(r, h, collar_s) for r, h in zip(refs, hyps))
    return _f1(tp, sum(len(r) for r in refs), sum(len(h) for h in hyps))


def at_score_dataset(refs: Sequence[Sequence[EventAnnotation]], hyps: Sequence[Sequence[EventAnnotation]]) -> float:
    """Per-class clip-level presence F1, macro over classes present in the references"""
    if len(refs) != len(hyps):
        raise DimensionError(f"{len(refs)} reference clips vs {len(hyps)} hypothesis clips")
    ref_sets = [{a.name for a in r} for r in refs]
    hyp_sets = [{a.name for a in h} for h in hyps]
    classes = sorted(set().union(*ref_sets)) if ref_sets else []
    if not classes:
        return 1.0 if not any(hyp_sets) else 0.0
    scores = []
    for name in classes:
        tp = sum(1 for r, h in zip(ref_sets, hyp_sets) if name in r and name in h)
        n_ref = sum(1 for r in ref_sets if name in r)
        n_hyp = sum(1 for h in hyp_sets if name in h)
        scores.append(_f1(tp, n_ref, n_hyp))
    return float(np.mean(scores))


def at_score(ref: Sequence[EventAnnotation], hyp: Sequence[EventAnnotation]) -> float:
    return at_score_dataset([ref], [hyp])


# Distribution distance

@dataclass
class FrechetReport:
    distance: float
    ridge: float = 0.0


def _psd_sqrt(matrix: np.ndarray) -> np.ndarray:
    values, vectors = linalg.eigh((matrix + matrix.T) / 2.0)
    return (vectors * np.sqrt(np.clip(values, 0.0, None))) @ vectors.T


def _is_singular(matrix: np.ndarray) -> bool:
    values = linalg.eigvalsh((matrix + matrix.T) / 2.0)
    return values.min() <= 1e-12 * max(values.max(), 1.0)


def frechet_from_moments(mu_a, sigma_a, mu_b, sigma_b) -> FrechetReport:
    """||mu_a - mu_b||^2 + tr(S_a + S_b - 2 (S_a S_b)^(1/2)), ridge-regularized when singular"""
    mu_a, mu_b = np.atleast_1d(mu_a).astype(np.float64), np.atleast_1d(mu_b).astype(np.float64)
    sigma_a, sigma_b = np.atleast_2d(sigma_a).astype(np.float64), np.atleast_2d(sigma_b).astype(np.float64)
    if mu_a.shape != mu_b.shape or sigma_a.shape != sigma_b.shape or sigma_a.shape[0] != mu_a.size:
        raise DimensionError("Moment shapes disagree")
    ridge = 0.0
    if _is_singular(sigma_a) or _is_singular(sigma_b):
        ridge = RIDGE
        eye = np.eye(mu_a.size)
        sigma_a, sigma_b = sigma_a + ridge * eye, sigma_b + ridge * eye
    root_a = _psd_sqrt(sigma_a)
    middle = root_a @ sigma_b @ root_a
    cross_trace = float(np.sum(np.sqrt(np.clip(linalg.eigvalsh((middle + middle.T) / 2.0), 0.0, None))))
    diff = mu_a - mu_b
    distance = float(diff @ diff + np.trace(sigma_a) + np.trace(sigma_b) - 2.0 * cross_trace)
    return FrechetReport(distance=max(distance, 0.0), ridge=ridge)


def frechet_report(features_a, features_b) -> FrechetReport:
    a, b = np.atleast_2d(features_a), np.atleast_2d(features_b)
    if a.shape[1] != b.shape[1]:
        raise DimensionError(f"Feature widths {a.shape[1]} and {b.shape[1]} differ")
    needed = a.shape[1] + 1
    if a.shape[0] < needed or b.shape[0] < needed:
        raise DimensionError(f"Need at least {needed} samples per set, got {a.shape[0]} and {b.shape[0]}")
    return frechet_from_moments(a.mean(axis=0), np.cov(a, rowvar=False),
                                b.mean(axis=0), np.cov(b, rowvar=False))


def frechet_distance(features_a, features_b) -> float:
    return frechet_report(features_a, features_b).distance


# Consistency and alignment

def _unit_rows(features: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(features, axis=1, keepdims=True)
    return features / np.where(norms > 0, norms, 1.0)


def _windows(waveform, sample_rate, window_s, hop_s) -> np.ndarray:
    features = window_features(waveform, sample_rate, window_s, hop_s)
    if features.shape[0] < 2:
        raise DimensionError(f"Need at least 2 windows of {window_s}s, clip gives {features.shape[0]}")
    return _unit_rows(features)


def intra_cosine(waveform, sample_rate: int = 4000, window_s: float = 10.0, hop_s: float = 5.0) -> float:
    """Mean pairwise cosine similarity of window features"""
    unit = _windows(waveform, sample_rate, window_s, hop_s)
    return float(np.mean([unit[i] @ unit[j] for i, j in combinations(range(len(unit)), 2)]))


def intra_distance(waveform, sample_rate: int = 4000, window_s: float = 10.0, hop_s: float = 5.0) -> float:
    """Mean pairwise Euclidean distance of unit-normalized window features"""
    unit = _windows(waveform, sample_rate, window_s, hop_s)
    return float(np.mean([np.linalg.norm(unit[i] - unit[j]) for i, j in combinations(range(len(unit)), 2)]))


def caption_alignment(waveform, caption: str, sample_rate: int = 4000, classes: List = None) -> float:
    """Cosine between mean band amplitudes and the caption's class-indicator vector"""
    classes = classes or DEFAULT_EVENT_CLASSES
    named = {c.name for c in classes_in_caption(caption, classes)}
    indicator = np.array([1.0 if c.name in named else 0.0 for c in classes])
    profile = band_amplitudes(waveform, sample_rate, classes).mean(axis=0)
    denominator = np.linalg.norm(indicator) * np.linalg.norm(profile)
    if denominator == 0:
        return 0.0
    return float(indicator @ profile / denominator)

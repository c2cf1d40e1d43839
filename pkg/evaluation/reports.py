"""
Evaluation drivers and metric report tables.

Reports are long tables with the fixed column order metric, value, config.
Ablation sweeps return one row per setting.
"""

from dataclasses import replace
from pathlib import Path
from typing import List, Sequence

import numpy as np
import pandas as pd

from control.attention_control import ControlConfig
from control.generation import generate_timing_controlled
from diffusion.sampler import DdimSampler
from evaluation.detector import detect_events
from evaluation.features import clip_features
from evaluation.metrics import (at_score_dataset, caption_alignment, eb_score_dataset, frechet_report,
                                intra_cosine, intra_distance)
from evaluation.synth_data import SynthClip
from longform.generator import LongformConfig, generate_long
from models.timing import TimingPrompt, WindowPlan
from planning.prompt_parser import format_prompts
from planning.window_planner import make_plan

REPORT_COLUMNS = ['metric', 'value', 'config']
ABLATION_COLUMNS = ['lambda', 'intra_cosine', 'intra_distance', 'caption_alignment', 'runs']


def report_frame(rows: Sequence[dict]) -> pd.DataFrame:
    return pd.DataFrame(list(rows), columns=REPORT_COLUMNS)


def write_report(frame: pd.DataFrame, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format='%.6f')
    return path


def read_report(path) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Report not found: {path}")
    return pd.read_csv(path)


def clip_timing_text(clip: SynthClip) -> str:
    """Timing prompts naming each annotated event with its interval"""
    return format_prompts([TimingPrompt(a.name, a.onset_s, a.offset_s) for a in clip.annotations])


def clip_plan(clip: SynthClip) -> WindowPlan:
    return make_plan(clip.caption, clip_timing_text(clip), clip.duration_s)


def _score_rows(config: str, refs, hyps, waveforms, captions, sample_rate, reference_features=None,
                logger=None) -> List[dict]:
    rows = [
        {'metric': 'eb', 'value': eb_score_dataset(refs, hyps), 'config': config},
        {'metric': 'at', 'value': at_score_dataset(refs, hyps), 'config': config},
        {'metric': 'caption_alignment',
         'value': float(np.mean([caption_alignment(w, c, sample_rate) for w, c in zip(waveforms, captions)])),
         'config': config},
    ]
    if reference_features is not None:
        features = np.stack([clip_features(w, sample_rate) for w in waveforms])
        if len(features) > features.shape[1]:
            report = frechet_report(reference_features, features)
            rows.append({'metric': 'frechet', 'value': report.distance, 'config': config})
            if report.ridge and logger:
                logger.warning(f"Singular feature covariance for '{config}': added ridge {report.ridge:g}")
        elif logger:
            logger.info(f"Skipping Fréchet distance for '{config}': {len(features)} clips are too few")
    return rows


def evaluate_timing_control(model, codec, sampler: DdimSampler, clips: List[SynthClip],
                            control_config: ControlConfig = None, baseline: bool = True, logger=None) -> pd.DataFrame:
    """Eb/At (plus alignment and Fréchet) of generations with and without timing control"""
    sample_rate = codec.config.sample_rate
    refs = [clip.annotations for clip in clips]
    captions = [clip.caption for clip in clips]
    originals = [clip.waveform for clip in clips]
    reference_features = np.stack([clip_features(w, sample_rate) for w in originals])

    rows = _score_rows('reference', refs, [detect_events(w, sample_rate) for w in originals], originals,
                       captions, sample_rate, logger=logger)
    settings = [('control', True)] + ([('no-control', False)] if baseline else [])
    for config, use_control in settings:
        waveforms = []
        for clip in clips:
            plan = clip_plan(clip)
            result = generate_timing_controlled(plan, model, codec, sampler, control_config,
                                                use_control=use_control, logger=logger)
            waveforms.append(result.waveform)
        hyps = [detect_events(w, sample_rate) for w in waveforms]
        rows.extend(_score_rows(config, refs, hyps, waveforms, captions, sample_rate,
                                reference_features, logger))
    frame = report_frame(rows)
    if logger:
        logger.log_metrics({f"{r.metric} [{r.config}]": r.value for r in frame.itertuples(index=False)},
                           title="TIMING CONTROL")
    return frame


def ablate_reference_guidance(model, codec, sampler: DdimSampler, plans: List[WindowPlan], lambdas: Sequence[float],
                              seeds: Sequence[int] = (0,), longform_config: LongformConfig = None,
                              control_config: ControlConfig = None, logger=None) -> pd.DataFrame:
    """Intra-clip consistency of long-form generations for every guidance weight"""
    longform_config = longform_config or LongformConfig()
    sample_rate = codec.config.sample_rate
    table = []
    for lambda_ in lambdas:
        config = replace(longform_config, lambda_=float(lambda_))
        cosines, distances, alignments = [], [], []
        for plan in plans:
            for seed in seeds:
                seeded = DdimSampler(sampler.schedule, replace(sampler.config, seed=int(seed)), logger)
                waveform = generate_long(plan, model, codec, seeded, config, control_config, logger).waveform
                cosines.append(intra_cosine(waveform, sample_rate))
                distances.append(intra_distance(waveform, sample_rate))
                alignments.append(caption_alignment(waveform, plan.global_caption, sample_rate))
        table.append({'lambda': float(lambda_), 'intra_cosine': float(np.mean(cosines)),
                      'intra_distance': float(np.mean(distances)),
                      'caption_alignment': float(np.mean(alignments)), 'runs': len(cosines)})
        if logger:
            logger.info(f"lambda={lambda_:.2f}: intra_cosine={table[-1]['intra_cosine']:.4f} "
                        f"over {len(cosines)} runs")
    return pd.DataFrame(table, columns=ABLATION_COLUMNS)

import pytest

from utils.config import API_KEY_ENV, FreeAudioConfig, PlanMode
from utils.errors import (CheckpointError, ConfigError, HookError, LlmError, NumericalError, PlanParseError,
                          TrainingDivergedError, exit_code_for)


def test_defaults(app_config):
    assert app_config.sample_rate == 4000 and app_config.frame_size == 160
    assert app_config.frame_rate == 25.0 and app_config.max_frames == 250
    assert (app_config.alpha, app_config.beta, app_config.lambda_) == (0.2, 0.8, 0.2)
    assert app_config.plan_mode == PlanMode.TEMPLATE and not app_config.is_llm_mode()
    assert app_config.log_to_file is False
    assert app_config.validate_config()


def test_environment_overrides(app_config, monkeypatch):
    monkeypatch.setenv('FREEAUDIO_ALPHA', '0.5')
    monkeypatch.setenv('FREEAUDIO_PLAN_MODE', 'LLM')
    monkeypatch.setenv('FREEAUDIO_STEPS', '20')
    config = FreeAudioConfig()
    assert config.alpha == 0.5 and config.steps == 20
    assert config.is_llm_mode()


@pytest.mark.parametrize('key,value', [
    ('alpha', 1.5), ('lambda_', -0.1), ('beta_semantics', 'other'),
    ('overlap_seconds', 0.04), ('overlap_seconds', 10.0), ('overlap_seconds', 0.03),
    ('max_seconds', 10.01), ('steps', 0), ('steps', 2000), ('guidance_scale', -1.0),
    ('llm_timeout', 0.0), ('llm_max_retries', -1),
])
def test_invalid_values(app_config, key, value):
    app_config.with_overrides(**{key: value})
    with pytest.raises(ConfigError):
        app_config.validate_config()


def test_overrides(app_config):
    app_config.with_overrides(alpha=0.4, beta=None, plan_mode='llm')
    assert app_config.alpha == 0.4 and app_config.beta == 0.8
    assert app_config.plan_mode == PlanMode.LLM
    with pytest.raises(ConfigError):
        app_config.with_overrides(colour='blue')


def test_snapshot_never_holds_the_api_key(app_config, monkeypatch):
    monkeypatch.setenv(API_KEY_ENV, 'sk-very-secret')
    snapshot = FreeAudioConfig().snapshot()
    assert 'sk-very-secret' not in repr(snapshot)
    assert not any('key' in name for name in snapshot)


def test_snapshot_round_trip(app_config):
    app_config.with_overrides(alpha=0.3, seed=9, plan_mode='llm')
    assert FreeAudioConfig.from_snapshot(app_config.snapshot()).snapshot() == app_config.snapshot()


def test_component_configs(app_config):
    app_config.with_overrides(alpha=0.1, lambda_=0.4, steps=7)
    assert app_config.codec_config().frame_rate == 25.0
    assert app_config.control_config().alpha == 0.1
    assert app_config.longform_config().lambda_ == 0.4
    assert app_config.sampler_config(seed=3).seed == 3 and app_config.sampler_config().steps == 7
    assert app_config.llm_config().api_key_env == API_KEY_ENV


@pytest.mark.parametrize('error,code', [
    (ConfigError("x"), 3),
    (PlanParseError("entry"), 3),
    (FileNotFoundError("x"), 4),
    (CheckpointError("x"), 4),
    (NumericalError("x"), 5),
    (TrainingDivergedError(3, float('nan'), 1e-3, float('nan')), 5),
    (LlmError("x"), 6),
    (HookError("x"), 1),
    (RuntimeError("x"), 1),
])
def test_exit_codes(error, code):
    assert exit_code_for(error) == code

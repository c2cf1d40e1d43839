"""
Shared fixtures: small codec/DiT configurations, seeded streams, loggers
writing into a temporary directory and a fake HTTP session for the LLM client.
"""

import logging
import os

import numpy as np
import pytest

from codec.block_codec import BlockCodec, CodecConfig
from diffusion.sampler import DdimSampler, SamplerConfig
from diffusion.schedule import NoiseSchedule
from dit.model import DitConfig, ToyDiT
from numerics.rng import SeededRng
from utils.config import API_KEY_ENV, FreeAudioConfig
from utils.logger import FreeAudioLogger
from utils.rate_limiter import RateLimiter


def pytest_collection_modifyitems(config, items):
    if os.getenv('FREEAUDIO_RUN_SLOW') == '1':
        return
    skip_slow = pytest.mark.skip(reason="slow test; set FREEAUDIO_RUN_SLOW=1 to run")
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return SeededRng(1234)


@pytest.fixture
def codec_config():
    return CodecConfig()


@pytest.fixture
def codec(codec_config):
    return BlockCodec(codec_config)


@pytest.fixture
def dit_config():
    """Two thin layers over the full 10 s window"""
    return DitConfig(dim=16, layers=2, heads=2, text_dim=8, max_frames=250, frame_rate=25.0)


@pytest.fixture
def model(dit_config):
    """Randomized weights so every path produces non-trivial outputs"""
    return ToyDiT(dit_config, seed=0).randomize(seed=7, scale=0.2)


@pytest.fixture
def schedule():
    return NoiseSchedule(1000)


@pytest.fixture
def sampler(schedule):
    return DdimSampler(schedule, SamplerConfig(steps=3, seed=11, guidance_scale=1.0))


@pytest.fixture
def log_dir(tmp_path):
    return tmp_path / 'logs'


@pytest.fixture
def logger(log_dir):
    log = FreeAudioLogger(log_dir=log_dir, log_level=logging.DEBUG, log_to_file=True,
                          name='FreeAudioTest')
    yield log
    log.close()


@pytest.fixture
def app_config(monkeypatch, log_dir):
    for name in list(os.environ):
        if name.startswith('FREEAUDIO_'):
            monkeypatch.delenv(name, raising=False)
    monkeypatch.setenv('LOG_TO_FILE', 'false')
    monkeypatch.setenv('LOG_DIR', str(log_dir))
    return FreeAudioConfig()


# LLM transport fakes

class FakeResponse:
    def __init__(self, status_code=200, payload=None, text=''):
        self.status_code = status_code
        self.payload = payload
        self.text = text

    def json(self):
        if self.payload is None:
            raise ValueError("No JSON body")
        return self.payload


def chat_response(content):
    return FakeResponse(200, {'choices': [{'message': {'role': 'assistant', 'content': content}}]})


class FakeSession:
    """Replays queued responses (or raises queued exceptions) for every POST"""

    def __init__(self, responses=None):
        self.responses = list(responses or [])
        self.calls = []

    def queue(self, *responses):
        self.responses.extend(responses)

    def post(self, url, **kwargs):
        self.calls.append((url, kwargs))
        item = self.responses.pop(0) if self.responses else FakeResponse(503, text='no response queued')
        if isinstance(item, Exception):
            raise item
        return item

    def get(self, url, **kwargs):
        raise AssertionError("The chat client never issues GET requests")


@pytest.fixture
def fake_session():
    return FakeSession()


@pytest.fixture
def fast_limiter():
    """Limiter that never blocks"""
    return RateLimiter(max_requests=10 ** 6, time_window=1.0, sleep=lambda s: None)


@pytest.fixture
def no_api_key(monkeypatch):
    monkeypatch.delenv(API_KEY_ENV, raising=False)


@pytest.fixture
def random_batch():
    def make(shape, seed=0):
        return SeededRng(seed).normal(shape)
    return make


@pytest.fixture
def tone():
    """Unit-amplitude cosine at a frequency, sampled at sample_rate"""
    def make(freq_hz, seconds, sample_rate=4000, amplitude=1.0):
        n = np.arange(int(round(seconds * sample_rate)))
        return amplitude * np.cos(2.0 * np.pi * freq_hz * n / sample_rate)
    return make

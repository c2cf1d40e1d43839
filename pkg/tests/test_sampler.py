from types import SimpleNamespace

import numpy as np
import pytest

from diffusion.sampler import DdimSampler, SamplerConfig
from diffusion.schedule import NoiseSchedule
from utils.errors import ConfigError, DimensionError, NumericalError


class GaussianDenoiser:
    """Exact noise predictor for data drawn from N(0, sigma^2)"""

    def __init__(self, schedule, sigma, channels=1):
        self.schedule = schedule
        self.sigma = sigma
        self.config = SimpleNamespace(in_channels=channels, max_frames=1)
        self.calls = []

    def predict_noise(self, latents, timestep, text_conditions, durations, hooks=None, pass_name='cond'):
        self.calls.append(pass_name)
        ab = self.schedule.alphas_cumprod[timestep]
        return np.sqrt(1.0 - ab) * latents / (ab * self.sigma ** 2 + 1.0 - ab)


class TestSchedule:
    def test_ddim_timesteps_descend_from_t_minus_one_to_zero(self, schedule):
        steps = schedule.ddim_timesteps(5)
        assert steps.tolist() == [999, 749, 500, 250, 0]

    def test_single_step(self, schedule):
        assert schedule.ddim_timesteps(1).tolist() == [999]

    def test_invalid_step_counts(self, schedule):
        with pytest.raises(ConfigError):
            schedule.ddim_timesteps(0)
        with pytest.raises(ConfigError):
            schedule.ddim_timesteps(1001)

    def test_predict_x0_inverts_q_sample(self, schedule, random_batch):
        x0, noise = random_batch((3, 4, 2), 0), random_batch((3, 4, 2), 1)
        t = np.array([0, 500, 999])
        x_t = schedule.q_sample(x0, t, noise)
        assert np.allclose(schedule.predict_x0(x_t, t, noise), x0, atol=1e-9)
        assert np.allclose(schedule.predict_eps(x_t, t, x0), noise, atol=1e-9)

    def test_invalid_betas(self):
        with pytest.raises(ConfigError):
            NoiseSchedule(100, beta_start=0.1, beta_end=0.01)


class TestDdimSampler:
    def test_identical_seeds_give_identical_outputs(self, model, sampler):
        conds = [model.embed_text("frying")]
        first = sampler.sample(model, conds, [2.0], num_frames=50)
        second = sampler.sample(model, conds, [2.0], num_frames=50)
        assert np.array_equal(first, second)

    def test_identity_callback_equals_no_callback(self, model, sampler):
        conds = [model.embed_text("owl hooting")]
        plain = sampler.sample(model, conds, [1.0], num_frames=25)
        seen = []

        def identity(x0, step_index, t):
            seen.append((step_index, t))
            return x0

        called = sampler.sample(model, conds, [1.0], num_frames=25, step_callback=identity)
        assert np.array_equal(plain, called)
        assert [s for s, _ in seen] == [0, 1, 2]

    def test_final_step_returns_the_callback_output(self, model, sampler):
        out = sampler.sample(model, [model.embed_text("frying")], [0.4], num_frames=10,
                             step_callback=lambda x0, i, t: np.zeros_like(x0))
        assert not np.any(out)

    def test_non_finite_callback_output_raises(self, model, sampler):
        with pytest.raises(NumericalError):
            sampler.sample(model, [model.embed_text("frying")], [0.4], num_frames=10,
                           step_callback=lambda x0, i, t: x0 * np.nan)

    def test_guidance_scale_one_runs_the_conditional_branch_only(self, schedule):
        denoiser = GaussianDenoiser(schedule, 1.0)
        DdimSampler(schedule, SamplerConfig(steps=4, guidance_scale=1.0)).sample(
            denoiser, ['c'], [1.0], initial_noise=np.zeros((1, 3, 1)))
        assert denoiser.calls == ['cond'] * 4

    def test_guidance_runs_both_branches(self, model, schedule):
        calls = []
        original = model.predict_noise

        def counting(*args, **kwargs):
            calls.append(kwargs.get('pass_name'))
            return original(*args, **kwargs)

        model.predict_noise = counting
        DdimSampler(schedule, SamplerConfig(steps=2, guidance_scale=3.0)).sample(
            model, [model.embed_text("frying")], [0.4], num_frames=10)
        assert calls == ['cond', 'uncond', 'cond', 'uncond']

    def test_gaussian_data_is_recovered_with_full_steps(self, schedule):
        sigma = 0.5
        denoiser = GaussianDenoiser(schedule, sigma)
        sampler = DdimSampler(schedule, SamplerConfig(steps=schedule.steps, seed=3, guidance_scale=1.0))
        noise = sampler.initial_noise((1, 4000, 1))
        samples = sampler.sample(denoiser, ['c'], [1.0], initial_noise=noise)
        assert abs(samples.std() / sigma - 1.0) < 0.05
        assert abs(samples.mean()) < 0.05

    def test_noise_batch_must_match_conditions(self, model, sampler):
        with pytest.raises(DimensionError):
            sampler.sample(model, [model.embed_text("frying")], [0.4], initial_noise=np.zeros((2, 10, 16)))

    def test_more_steps_than_training_steps_raise(self):
        with pytest.raises(ConfigError):
            DdimSampler(NoiseSchedule(10), SamplerConfig(steps=20))

import numpy as np
import pytest

from control.attention_control import (ControlConfig, TimingController, aggregate_outputs, decouple_queries,
                                       layout_from_plan, timing_output)
from control.generation import batch_for_plan, generate_timing_controlled
from dit.hooks import CROSS, POST_OUTPUT, PRE_QUERY, SELF, HookSet, chain_callbacks
from models.layouts import TimingLayout
from models.timing import PlanWindow, WindowPlan
from planning.window_planner import make_plan
from utils.errors import ConfigError, DimensionError, HookError, LayoutError


def three_window_plan(total_s=10.0, cut=4.02):
    windows = [PlanWindow(0.0, cut, ["dog barking"], "Dog barking"),
               PlanWindow(cut, 8.0, ["running water"], "Running water"),
               PlanWindow(8.0, total_s, ["alarm ringing"], "Alarm ringing")]
    return WindowPlan(total_s=total_s, windows=windows, global_caption="dog, water then alarm")


def hooked_forward(model, controller, x, captions, durations, observer=None):
    hooks = HookSet()
    for (kind, phase), callback in controller.callbacks().items():
        if phase == POST_OUTPUT and observer is not None:
            callback = chain_callbacks(callback, observer)
        for layer in range(model.config.layers):
            hooks.register(kind, layer, phase, callback)
    return model.forward(x, 600, [model.embed_text(c) for c in captions], durations, hooks=hooks)


@pytest.fixture
def layout():
    return layout_from_plan(three_window_plan(), 25.0)


class TestControlConfig:
    def test_ratios_under_timing_semantics(self):
        config = ControlConfig(alpha=0.2, beta=0.8)
        assert config.ratio(CROSS) == 0.2
        assert config.ratio(SELF) == pytest.approx(0.2)

    def test_ratios_under_base_semantics(self):
        assert ControlConfig(beta=0.8, beta_semantics='base').ratio(SELF) == 0.8

    @pytest.mark.parametrize('kwargs', [{'alpha': -0.1}, {'beta': 1.5}, {'beta_semantics': 'other'},
                                        {'aggregate_sites': {'mlp'}}])
    def test_invalid_configs(self, kwargs):
        with pytest.raises(ConfigError):
            ControlConfig(**kwargs)


class TestLayout:
    def test_window_frames_round_half_up(self, layout):
        assert layout.windows == [(0, 100, 1), (100, 200, 2), (200, 250, 3)]
        assert layout.lengths() == [100, 100, 50]
        assert layout.plan_indices == [0, 1, 2]

    def test_windows_rounding_to_nothing_are_dropped(self):
        plan = WindowPlan(10.0, [PlanWindow(0.0, 0.01, ["a"], "A"), PlanWindow(0.01, 10.0, ["b"], "B")], "ab")
        layout = layout_from_plan(plan, 25.0)
        assert layout.windows == [(0, 250, 1)]
        assert layout.plan_indices == [1]

    def test_dropped_windows_are_logged(self, logger):
        plan = WindowPlan(10.0, [PlanWindow(0.0, 0.01, ["owl hooting"], "Owl hooting"),
                                 PlanWindow(0.01, 10.0, ["frying"], "Frying")], "owl and frying")
        layout_from_plan(plan, 25.0, logger=logger)
        text = logger.log_file.read_text(encoding='utf-8')
        assert "Window 0" in text and "covers no frames" in text
        assert "Window 1" not in text

    def test_custom_indices(self):
        layout = layout_from_plan(three_window_plan(), 25.0, base_index=2, first_sub_index=5)
        assert layout.base_index == 2 and layout.batch_indices() == [5, 6, 7]

    def test_base_length_mismatch(self):
        with pytest.raises(LayoutError):
            layout_from_plan(three_window_plan(), 25.0, base_active_frames=200)

    def test_gapped_windows_are_rejected(self):
        with pytest.raises(LayoutError):
            TimingLayout(frame_rate=25.0, windows=[(0, 10, 1), (12, 20, 2)], base_active_frames=20)

    def test_sub_cannot_reuse_the_base_row(self):
        with pytest.raises(LayoutError):
            TimingLayout(frame_rate=25.0, windows=[(0, 10, 0)], base_active_frames=10)

    def test_check_batch(self, layout):
        with pytest.raises(LayoutError):
            layout.check_batch(3, 250)
        with pytest.raises(LayoutError):
            layout.check_batch(4, 249)


class TestDecouple:
    def test_single_window_copies_the_base_prefix(self, random_batch):
        layout = TimingLayout(frame_rate=25.0, windows=[(0, 10, 1)], base_active_frames=10)
        q = random_batch((2, 12, 4))
        out = decouple_queries(q, layout)
        assert np.array_equal(out[1, :10], q[0, :10])
        assert np.array_equal(out[1, 10:], q[1, 10:])
        assert np.array_equal(out[0], q[0])

    def test_windows_receive_their_base_slices(self, layout, random_batch):
        q = random_batch((4, 250, 6))
        out = decouple_queries(q, layout)
        for start, end, index in layout.windows:
            assert np.array_equal(out[index, :end - start], q[0, start:end])
        assert np.array_equal(out[3, 50:], q[3, 50:])

    def test_input_is_not_modified(self, layout, random_batch):
        q = random_batch((4, 250, 6))
        before = q.copy()
        decouple_queries(q, layout)
        assert np.array_equal(q, before)


class TestAggregate:
    def test_ratio_one_leaves_outputs_untouched(self, layout, random_batch):
        o = random_batch((4, 250, 6))
        assert np.array_equal(aggregate_outputs(o, layout, 1.0), o)

    def test_ratio_zero_replaces_the_base_with_sub_outputs(self, layout, random_batch):
        o = random_batch((4, 250, 6))
        out = aggregate_outputs(o, layout, 0.0)
        assert np.array_equal(out[0], timing_output(o, layout))
        assert np.array_equal(out[1:], o[1:])

    def test_half_ratio_of_constant_outputs(self, layout):
        o = np.zeros((4, 250, 6))
        o[1:] = 1.0
        out = aggregate_outputs(o, layout, 0.5)
        assert np.all(out[0] == 0.5)

    def test_base_padding_is_not_touched(self, random_batch):
        layout = TimingLayout(frame_rate=25.0, windows=[(0, 4, 1), (4, 6, 2)], base_active_frames=6)
        o = random_batch((3, 9, 2))
        out = aggregate_outputs(o, layout, 0.3)
        assert np.array_equal(out[0, 6:], o[0, 6:])

    def test_fused_values_stay_between_the_sources(self, layout):
        rng = np.random.default_rng(5)
        for _ in range(100):
            o = rng.normal(size=(4, 250, 3))
            ratio = rng.uniform()
            fused = aggregate_outputs(o, layout, ratio)[0]
            timing = timing_output(o, layout)
            lo, hi = np.minimum(o[0], timing), np.maximum(o[0], timing)
            assert np.all(fused >= lo - 1e-12) and np.all(fused <= hi + 1e-12)


class TestController:
    def test_callbacks_follow_the_config(self, layout):
        sites = TimingController(layout, ControlConfig()).callbacks()
        assert set(sites) == {(CROSS, PRE_QUERY), (CROSS, POST_OUTPUT), (SELF, POST_OUTPUT)}
        sites = TimingController(layout, ControlConfig(decouple_enabled=False, aggregate_sites={CROSS})).callbacks()
        assert set(sites) == {(CROSS, POST_OUTPUT)}

    def test_install_and_uninstall(self, layout, model, sampler):
        controller = TimingController(layout, ControlConfig()).install(sampler, model)
        assert len(sampler.hooks) == 3 * model.config.layers
        with pytest.raises(HookError):
            controller.install(sampler, model)
        controller.uninstall()
        assert len(sampler.hooks) == 0

    def test_uninstalled_controller_leaves_sampling_unchanged(self, layout, model, sampler):
        conds = [model.embed_text("frying")]
        before = sampler.sample(model, conds, [2.0], num_frames=50)
        with TimingController(layout).install(sampler, model):
            pass
        assert np.array_equal(sampler.sample(model, conds, [2.0], num_frames=50), before)

    def test_layout_longer_than_the_model(self, model, sampler):
        plan = three_window_plan(total_s=12.0)
        layout = layout_from_plan(plan, 25.0)
        with pytest.raises(LayoutError):
            TimingController(layout).install(sampler, model)
        assert len(sampler.hooks) == 0

    def test_reordering_the_sub_latents_leaves_the_base_unchanged(self, layout, model, random_batch):
        x = random_batch((4, 250, 16), 3)
        captions = ["dog, water then alarm", "Dog barking", "Running water", "Alarm ringing"]
        durations = [10.0, 4.0, 4.0, 2.0]
        reordered = TimingLayout(frame_rate=25.0, windows=[(0, 100, 3), (100, 200, 1), (200, 250, 2)],
                                 base_active_frames=250)
        order = [0, 2, 3, 1]
        plain = hooked_forward(model, TimingController(layout), x, captions, durations)
        moved = hooked_forward(model, TimingController(reordered), x[order], [captions[i] for i in order],
                               [durations[i] for i in order])
        assert np.allclose(moved[0], plain[0], rtol=0, atol=1e-12)
        assert np.allclose(moved, plain[order], rtol=0, atol=1e-12)

    def test_reordered_aggregation_is_identical(self, layout, random_batch):
        o = random_batch((4, 250, 6))
        reordered = TimingLayout(frame_rate=25.0, windows=[(0, 100, 2), (100, 200, 3), (200, 250, 1)],
                                 base_active_frames=250)
        moved = o[[0, 3, 1, 2]]
        assert np.array_equal(aggregate_outputs(moved, reordered, 0.3)[0], aggregate_outputs(o, layout, 0.3)[0])

    def test_single_window_with_zero_ratios_mirrors_the_sub_output(self, model, random_batch):
        plan = WindowPlan(4.0, [PlanWindow(0.0, 4.0, ["frying"], "Frying")], "frying")
        layout = layout_from_plan(plan, 25.0)
        seen = []

        def observe(o, context):
            seen.append((context.kind, context.layer))
            assert np.array_equal(o[0, :100], o[1, :100])
            return o

        controller = TimingController(layout, ControlConfig(alpha=0.0, beta=1.0))
        hooked_forward(model, controller, random_batch((2, 100, 16), 8), ["frying", "Frying"], [4.0, 4.0],
                       observer=observe)
        assert sorted(seen) == sorted((kind, layer) for kind in (SELF, CROSS)
                                      for layer in range(model.config.layers))


class TestGeneration:
    def test_batch_for_plan(self, model):
        captions, durations, layout = batch_for_plan(three_window_plan(), model, 25.0)
        assert captions == ["dog, water then alarm", "Dog barking", "Running water", "Alarm ringing"]
        assert durations == [10.0, 4.0, 4.0, 2.0]
        assert layout.k == 3

    def test_controlled_waveform_length(self, model, codec, sampler, logger):
        result = generate_timing_controlled(three_window_plan(), model, codec, sampler, logger=logger)
        assert result.waveform.shape == (40000,)
        assert result.base_latent.shape == (250, 16)
        assert result.layout.k == 3 and result.sub_latents == []

    def test_sub_latents_are_kept_on_request(self, model, codec, sampler):
        result = generate_timing_controlled(three_window_plan(), model, codec, sampler,
                                            ControlConfig(keep_sub_latents=True))
        assert [s.shape[0] for s in result.sub_latents] == [100, 100, 50]

    def test_identity_fusion_reproduces_plain_generation(self, model, codec, sampler):
        plan = three_window_plan()
        controlled = generate_timing_controlled(plan, model, codec, sampler, ControlConfig(alpha=1.0, beta=0.0))
        plain = generate_timing_controlled(plan, model, codec, sampler, use_control=False)
        assert np.allclose(controlled.base_latent, plain.base_latent, atol=1e-10)
        assert np.allclose(controlled.waveform, plain.waveform, atol=1e-10)

    def test_fusion_changes_the_base(self, model, codec, sampler):
        plan = three_window_plan()
        controlled = generate_timing_controlled(plan, model, codec, sampler)
        plain = generate_timing_controlled(plan, model, codec, sampler, use_control=False)
        assert not np.allclose(controlled.base_latent, plain.base_latent)

    def test_subs_ignore_aggregation_without_decoupling(self, model, codec, sampler):
        plan = three_window_plan()
        strong = generate_timing_controlled(plan, model, codec, sampler, ControlConfig(
            alpha=0.0, beta=1.0, decouple_enabled=False, keep_sub_latents=True))
        weak = generate_timing_controlled(plan, model, codec, sampler, ControlConfig(
            alpha=1.0, beta=0.0, decouple_enabled=False, keep_sub_latents=True))
        for a, b in zip(strong.sub_latents, weak.sub_latents):
            assert np.allclose(a, b, atol=1e-12)

    def test_plan_without_timing_runs_plain(self, model, codec, sampler):
        plan = make_plan("rain on a tin roof", "", 4.0)
        result = generate_timing_controlled(plan, model, codec, sampler)
        assert result.layout is None
        assert result.base_latent.shape == (100, 16)
        assert result.waveform.shape == (16000,)

    def test_plans_longer_than_the_model(self, model, codec, sampler):
        with pytest.raises(DimensionError):
            generate_timing_controlled(three_window_plan(total_s=12.0), model, codec, sampler)

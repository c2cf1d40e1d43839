import numpy as np
import pytest

from dit.checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from dit.hooks import CROSS, POST_OUTPUT, PRE_QUERY, SELF, HookSet, chain_callbacks
from dit.model import DitConfig, ToyDiT, masked_mse
from dit.text_encoder import OOV_TOKEN, TextEncoder
from utils.errors import CheckpointError, ConfigError, DimensionError, HookError, TextEncodingError


def conditions(model, *captions):
    return [model.embed_text(c) for c in captions]


class TestTextEncoder:
    def test_empty_caption_raises(self):
        with pytest.raises(TextEncodingError):
            TextEncoder().encode("")

    def test_known_word_is_a_single_token(self):
        encoder = TextEncoder()
        tokens = encoder.encode("frying").tokens
        assert tokens.tolist() == [encoder.index['frying']]

    def test_unknown_words_map_to_oov(self):
        encoder = TextEncoder()
        tokens = encoder.encode("a zebra while frying").tokens
        assert encoder.index[OOV_TOKEN] in tokens.tolist()

    def test_random_strings_never_crash(self):
        encoder = TextEncoder()
        rng = np.random.default_rng(0)
        alphabet = list("abcdefghij ,.!?<>0123456789")
        for _ in range(200):
            text = "".join(rng.choice(alphabet, size=int(rng.integers(1, 30))))
            if text.strip():
                assert len(encoder.encode(text)) >= 1


class TestForward:
    def test_zero_weight_model_outputs_zero(self, dit_config, random_batch):
        model = ToyDiT(dit_config).zero()
        out = model.forward(random_batch((2, 20, 16)), 500, conditions(model, "frying", "owl hooting"), [0.8, 0.4])
        assert not np.any(out)

    def test_identity_hooks_are_transparent(self, model, random_batch):
        x = random_batch((2, 30, 16))
        conds = conditions(model, "frying", "dog barking")
        hooks = HookSet()
        for layer in range(model.config.layers):
            for kind in (SELF, CROSS):
                for phase in (PRE_QUERY, POST_OUTPUT):
                    hooks.register(kind, layer, phase, lambda tensor, context: tensor)
        plain = model.forward(x, 300, conds, [1.2, 0.6])
        hooked = model.forward(x, 300, conds, [1.2, 0.6], hooks=hooks)
        assert np.array_equal(plain, hooked)

    def test_padded_frames_do_not_influence_the_output(self, model, random_batch):
        x = random_batch((1, 40, 16))
        changed = x.copy()
        changed[0, 25:] = 100.0
        conds = conditions(model, "running water")
        assert np.array_equal(model.forward(x, 10, conds, [1.0]), model.forward(changed, 10, conds, [1.0]))

    def test_total_seconds_conditioning_changes_the_output(self, model, random_batch):
        x = random_batch((1, 120, 16))
        conds = conditions(model, "frying")
        assert model.active_lengths([4.0], 120).tolist() == model.active_lengths([4.01], 120).tolist()
        short = model.forward(x, 400, conds, [4.0])
        longer = model.forward(x, 400, conds, [4.01])
        assert not np.allclose(short[:, :100], longer[:, :100])

    def test_hook_context_exposes_active_keys(self, model, random_batch):
        seen = {}

        def capture(tensor, context):
            seen[context.layer] = context.active_keys(1)
            return tensor

        hooks = HookSet()
        hooks.register(SELF, 0, POST_OUTPUT, capture)
        model.forward(random_batch((2, 30, 16)), 1, conditions(model, "frying", "frying"), [1.2, 0.4], hooks=hooks)
        keys, values = seen[0]
        assert keys.shape == (10, model.config.dim) and values.shape == (10, model.config.dim)

    def test_active_lengths_round_half_up(self, model):
        assert model.active_lengths([10.0, 0.02, 4.02], 250).tolist() == [250, 1, 100]

    def test_duration_outside_the_window_raises(self, model):
        with pytest.raises(DimensionError):
            model.active_lengths([10.5], 250)

    def test_wrong_batch_shapes_raise(self, model, random_batch):
        with pytest.raises(DimensionError):
            model.forward(random_batch((2, 10, 8)), 0, conditions(model, "a", "b"), [0.4, 0.4])
        with pytest.raises(DimensionError):
            model.forward(random_batch((2, 10, 16)), 0, conditions(model, "a"), [0.4, 0.4])

    def test_heads_must_divide_dim(self):
        with pytest.raises(ConfigError):
            DitConfig(dim=10, heads=3)


class TestHooks:
    def test_one_callback_per_site(self):
        hooks = HookSet()
        hooks.register(SELF, 0, POST_OUTPUT, lambda t, c: t)
        with pytest.raises(HookError):
            hooks.register(SELF, 0, POST_OUTPUT, lambda t, c: t)

    def test_unknown_site_raises(self):
        with pytest.raises(HookError):
            HookSet().register('mlp', 0, POST_OUTPUT, lambda t, c: t)

    def test_remove_frees_the_site(self):
        hooks = HookSet()
        handle = hooks.register(CROSS, 1, PRE_QUERY, lambda t, c: t)
        hooks.remove(handle)
        assert len(hooks) == 0
        hooks.register(CROSS, 1, PRE_QUERY, lambda t, c: t)

    def test_shape_changing_callback_raises(self, model, random_batch):
        hooks = HookSet()
        hooks.register(SELF, 0, PRE_QUERY, lambda t, c: t[:, :-1])
        with pytest.raises(HookError):
            model.forward(random_batch((1, 10, 16)), 0, conditions(model, "frying"), [0.4], hooks=hooks)

    def test_chained_callbacks_run_left_to_right(self):
        chained = chain_callbacks(lambda t, c: t + 1, None, lambda t, c: t * 2)
        assert chained(np.array([1.0]), None).tolist() == [4.0]


class TestGradients:
    def test_backward_matches_central_differences(self, random_batch):
        config = DitConfig(dim=8, layers=2, heads=2, text_dim=4, max_frames=8, frame_rate=25.0)
        model = ToyDiT(config, seed=3).randomize(seed=5, scale=0.3)
        x = random_batch((2, 8, 16), seed=1)
        target = random_batch((2, 8, 16), seed=2)
        timesteps = np.array([10.0, 700.0])
        conds = conditions(model, "frying while dog barking", "owl hooting")
        durations = [0.2, 0.32]

        def loss():
            out, cache = model.forward(x, timesteps, conds, durations, keep_cache=True)
            return masked_mse(out, target, cache['lengths'])[0]

        out, cache = model.forward(x, timesteps, conds, durations, keep_cache=True)
        _, d_out = masked_mse(out, target, cache['lengths'])
        analytic = model.backward(d_out, cache)
        assert set(analytic) == set(model.params)

        h = 1e-6
        for name in sorted(model.params):
            param = model.params[name]
            numeric = np.zeros_like(param)
            for index in np.ndindex(param.shape):
                saved = param[index]
                param[index] = saved + h
                up = loss()
                param[index] = saved - h
                down = loss()
                param[index] = saved
                numeric[index] = (up - down) / (2 * h)
            scale = np.linalg.norm(analytic[name]) + np.linalg.norm(numeric)
            if scale < 1e-10:
                continue
            error = np.linalg.norm(analytic[name] - numeric) / scale
            assert error < 1e-4, f"{name}: relative error {error:.2e}"

    def test_masked_mse_ignores_padded_frames(self):
        prediction = np.zeros((1, 4, 2))
        target = np.ones((1, 4, 2))
        target[0, 2:] = 50.0
        loss, grad = masked_mse(prediction, target, [2])
        assert loss == 1.0
        assert not np.any(grad[0, 2:])


class TestCheckpoint:
    def test_round_trip(self, tmp_path, model):
        checkpoint = Checkpoint(config=model.config, weights=model.state_dict(),
                                ema_weights={k: v * 0.5 for k, v in model.params.items()}, step=12,
                                metadata={'note': 'test'})
        loaded = load_checkpoint(save_checkpoint(checkpoint, tmp_path / 'model.ckpt'))
        assert loaded.config == model.config
        assert loaded.step == 12 and loaded.metadata == {'note': 'test'}
        for name, value in model.params.items():
            assert np.array_equal(loaded.weights[name], value)
            assert np.array_equal(loaded.ema_weights[name], value * 0.5)
        rebuilt = loaded.build_model(use_ema=False)
        assert np.array_equal(rebuilt.params['w_in'], model.params['w_in'])

    def test_missing_checkpoint(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(tmp_path / 'absent.ckpt')

    def test_foreign_file(self, tmp_path):
        path = tmp_path / 'foreign.ckpt'
        path.write_bytes(b'NOTACHECKPOINT')
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

    def test_truncated_checkpoint(self, tmp_path, model):
        checkpoint = Checkpoint(config=model.config, weights=model.state_dict(), ema_weights=model.state_dict())
        path = save_checkpoint(checkpoint, tmp_path / 'model.ckpt')
        path.write_bytes(path.read_bytes()[:-10])
        with pytest.raises(CheckpointError):
            load_checkpoint(path)

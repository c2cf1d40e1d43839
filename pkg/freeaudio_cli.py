"""
FreeAudio command line
Dataset synthesis, training, planning, timing-controlled and long-form generation,
evaluation, ablation sweeps and spectrogram rendering
"""

import argparse
import logging
import sys
from dataclasses import replace

from codec.block_codec import BlockCodec
from codec.wav_io import read_wav, write_wav
from control.attention_control import layout_from_plan
from control.generation import check_plan_fits, generate_timing_controlled
from diffusion.sampler import DdimSampler
from diffusion.schedule import NoiseSchedule
from diffusion.trainer import Trainer, TrainerConfig, write_training_manifest
from dit.checkpoint import load_checkpoint, save_checkpoint
from dit.model import DitConfig, ToyDiT
from evaluation.reports import ablate_reference_guidance, clip_plan, evaluate_timing_control, write_report
from evaluation.synth_data import examples_from_shard, read_shard, synth_dataset, write_shard
from longform.generator import LongformGenerator
from planning.plan_io import load_plan, save_plan
from planning.window_planner import make_plan
from utils.config import FreeAudioConfig, PlanMode
from utils.errors import EXIT_CODES, ConfigError, exit_code_for
from utils.logger import FreeAudioLogger
from utils.manifest import RunManifest, manifest_path_for
from utils.spectrogram import render_spectrogram

# Flags that map onto FreeAudioConfig attributes
CONFIG_FLAGS = {
    'alpha': 'alpha', 'beta': 'beta', 'lambda_': 'lambda_', 'overlap_seconds': 'overlap_seconds',
    'steps': 'steps', 'seed': 'seed', 'guidance_scale': 'guidance_scale', 'mode': 'plan_mode',
    'llm_base_url': 'llm_base_url',
}


class FreeAudioApp:
    """Runs one CLI command: validate inputs, write the manifest, then the outputs"""

    def __init__(self, config: FreeAudioConfig = None, logger: FreeAudioLogger = None):
        self.config = config or FreeAudioConfig()
        self.logger = logger or FreeAudioLogger(
            log_dir=self.config.log_dir,
            log_level=getattr(logging, self.config.log_level, logging.INFO),
            log_to_file=self.config.log_to_file,
        )
        self.pending_manifest = None

    # Components

    def codec(self) -> BlockCodec:
        return BlockCodec(self.config.codec_config())

    def sampler(self) -> DdimSampler:
        schedule = NoiseSchedule(self.config.train_timesteps)
        return DdimSampler(schedule, self.config.sampler_config(), self.logger)

    def load_model(self, path) -> ToyDiT:
        checkpoint = load_checkpoint(path)
        self.logger.info(f"📦 Loaded checkpoint {path} (step {checkpoint.step})")
        return checkpoint.build_model(use_ema=True, logger=self.logger)

    def llm_client(self):
        if self.config.plan_mode != PlanMode.LLM:
            return None
        from llm_client.chat_client import ChatClient
        return ChatClient(self.config.llm_config(), logger=self.logger)

    def build_plan(self, args, total_s: float):
        if getattr(args, 'plan', None):
            return load_plan(args.plan)
        if not args.caption:
            raise ConfigError("Give either --plan or --caption")
        return make_plan(args.caption, args.timing or "", total_s, self.config.plan_mode,
                         self.llm_client(), self.logger)

    # Manifest handling

    def _begin(self, args, output, inputs=None) -> RunManifest:
        manifest = RunManifest(command=args.command, argv=list(args.argv), seed=self.config.seed,
                               config=self.config.snapshot(),
                               inputs={k: str(v) for k, v in (inputs or {}).items() if v},
                               outputs={'output': str(output)})
        manifest.write(manifest_path_for(output))
        self.pending_manifest = manifest_path_for(output)
        return manifest

    def _finish(self, manifest: RunManifest, output):
        manifest.finish(manifest_path_for(output))
        self.pending_manifest = None
        self.logger.info(f"✅ {manifest.command}: wrote {output}")

    def discard_pending(self):
        """Remove the manifest of a command that failed before finishing"""
        if self.pending_manifest is not None and self.pending_manifest.exists():
            self.pending_manifest.unlink()
            self.logger.warning(f"🧹 Removed unfinished manifest {self.pending_manifest}")
        self.pending_manifest = None

    # Commands

    def cmd_synth(self, args):
        manifest = self._begin(args, args.output)
        clips = synth_dataset(n=args.count, seed=self.config.seed, duration_s=args.seconds,
                              sample_rate=self.config.sample_rate, frame_size=self.config.frame_size,
                              logger=self.logger)
        write_shard(clips, args.output, self.config.sample_rate, self.logger)
        self._finish(manifest, args.output)

    def cmd_train(self, args):
        codec = self.codec()
        dataset = []
        for shard in args.shards:
            dataset.extend(examples_from_shard(shard, codec))
        dit_config = DitConfig(dim=args.dim, layers=args.layers, heads=args.heads,
                               max_frames=self.config.max_frames, frame_rate=self.config.frame_rate)
        trainer_config = TrainerConfig(lr=args.lr, steps=args.train_steps, batch_size=args.batch_size,
                                       seed=self.config.seed)
        manifest = self._begin(args, args.output, {f'shard{i}': s for i, s in enumerate(args.shards)})
        model = ToyDiT(dit_config, seed=self.config.seed, logger=self.logger)
        trainer = Trainer(model, trainer_config, NoiseSchedule(self.config.train_timesteps), self.logger,
                          show_progress=True)
        checkpoint = trainer.train(dataset)
        save_checkpoint(checkpoint, args.output)
        codec_snapshot = {'sample_rate': codec.config.sample_rate, 'frame_size': codec.config.frame_size,
                          'latent_scale': codec.config.latent_scale, 'model_bins': list(codec.config.model_bins)}
        write_training_manifest(str(args.output) + '.training.json', args.shards, self.config.seed,
                                trainer_config, dit_config, codec_snapshot, args.output)
        self._finish(manifest, args.output)

    def cmd_plan(self, args):
        plan = self.build_plan(args, args.seconds)
        manifest = self._begin(args, args.output)
        save_plan(plan, args.output)
        self._finish(manifest, args.output)

    def cmd_generate(self, args):
        model = self.load_model(args.checkpoint)
        plan = self.build_plan(args, args.seconds)
        codec = self.codec()
        check_plan_fits(plan, model)
        if not args.no_control and plan.is_timing_controlled():
            layout_from_plan(plan, codec.frame_rate)
        manifest = self._begin(args, args.output, {'checkpoint': args.checkpoint, 'plan': args.plan})
        result = generate_timing_controlled(plan, model, codec, self.sampler(), self.config.control_config(),
                                            use_control=not args.no_control, logger=self.logger)
        write_wav(args.output, result.waveform, codec.config.sample_rate)
        self._finish(manifest, args.output)

    def cmd_generate_long(self, args):
        model = self.load_model(args.checkpoint)
        plan = self.build_plan(args, args.total_seconds)
        codec = self.codec()
        generator = LongformGenerator(model, codec, self.sampler(), self.config.longform_config(),
                                      self.config.control_config(), self.logger)
        generator.plan(plan)
        manifest = self._begin(args, args.output, {'checkpoint': args.checkpoint, 'plan': args.plan})
        result = generator.generate(plan)
        write_wav(args.output, result.waveform, codec.config.sample_rate)
        self._finish(manifest, args.output)

    def cmd_eval(self, args):
        model = self.load_model(args.checkpoint)
        clips = read_shard(args.shard, self.config.sample_rate)
        if args.limit:
            clips = clips[:args.limit]
        if not clips:
            raise ConfigError(f"Shard {args.shard} holds no clips")
        codec = self.codec()
        for clip in clips:
            plan = clip_plan(clip)
            check_plan_fits(plan, model)
            layout_from_plan(plan, codec.frame_rate)
        manifest = self._begin(args, args.output, {'checkpoint': args.checkpoint, 'shard': args.shard})
        frame = evaluate_timing_control(model, codec, self.sampler(), clips, self.config.control_config(),
                                        baseline=not args.no_baseline, logger=self.logger)
        write_report(frame, args.output)
        self._finish(manifest, args.output)

    def cmd_ablate(self, args):
        model = self.load_model(args.checkpoint)
        plan = self.build_plan(args, args.total_seconds)
        codec = self.codec()
        longform_config = self.config.longform_config()
        for lambda_ in args.lambdas:
            LongformGenerator(model, codec, self.sampler(), replace(longform_config, lambda_=float(lambda_)),
                              self.config.control_config()).plan(plan)
        manifest = self._begin(args, args.output, {'checkpoint': args.checkpoint, 'plan': args.plan})
        table = ablate_reference_guidance(model, codec, self.sampler(), [plan], args.lambdas,
                                          seeds=args.seeds or [self.config.seed],
                                          longform_config=longform_config,
                                          control_config=self.config.control_config(), logger=self.logger)
        write_report(table, args.output)
        self._finish(manifest, args.output)

    def cmd_spectrogram(self, args):
        waveform = read_wav(args.input, self.config.sample_rate)
        manifest = self._begin(args, args.output, {'input': args.input})
        render_spectrogram(waveform, args.output)
        self._finish(manifest, args.output)

    def cmd_replay(self, args):
        """Re-run a manifest's command and compare output digests"""
        recorded = RunManifest.read(args.manifest)
        if recorded.command == 'replay':
            raise ConfigError("Cannot replay a replay manifest")
        self.logger.info(f"🔁 Replaying '{recorded.command}' from {args.manifest}")
        code = run(recorded.argv, config=FreeAudioConfig.from_snapshot(recorded.config), logger=self.logger)
        if code:
            return code
        replayed = RunManifest.read(manifest_path_for(recorded.outputs['output']))
        mismatched = [k for k, v in recorded.digests.items() if replayed.digests.get(k) != v]
        if mismatched:
            self.logger.error(f"❌ Replay outputs differ: {', '.join(mismatched)}")
            return 1
        self.logger.info("✅ Replay reproduced every output bit for bit")
        return 0


def _add_control_flags(parser):
    parser.add_argument('--alpha', type=float, help='cross-attention fusion ratio (default 0.2)')
    parser.add_argument('--beta', type=float, help='self-attention fusion ratio (default 0.8)')


def _add_sampling_flags(parser):
    parser.add_argument('--checkpoint', required=True, help='trained checkpoint file')
    parser.add_argument('--steps', type=int, help='DDIM steps (default 50)')
    parser.add_argument('--seed', type=int, help='sampling seed')
    parser.add_argument('--guidance-scale', dest='guidance_scale', type=float, help='classifier-free guidance')


def _add_plan_flags(parser):
    parser.add_argument('--plan', help='plan file written by the plan command')
    parser.add_argument('--caption', help='overall text prompt')
    parser.add_argument('--timing', default='', help='timing prompts, e.g. "owl hooting<2.4,5.2>"')
    parser.add_argument('--mode', choices=[m.value for m in PlanMode], help='recaption mode')
    parser.add_argument('--llm-base-url', dest='llm_base_url', help='chat-completion endpoint base URL')


def _add_longform_flags(parser):
    parser.add_argument('--total-seconds', dest='total_seconds', type=float, required=True)
    parser.add_argument('--overlap-seconds', dest='overlap_seconds', type=float, help='segment overlap (default 2)')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='freeaudio', description=__doc__.strip().splitlines()[0])
    commands = parser.add_subparsers(dest='command', required=True)

    p = commands.add_parser('synth', help='synthesize a training/evaluation shard')
    p.add_argument('--output', required=True, help='shard directory')
    p.add_argument('--count', type=int, default=200)
    p.add_argument('--seconds', type=float, default=10.0)
    p.add_argument('--seed', type=int)

    p = commands.add_parser('train', help='train the toy DiT on shards')
    p.add_argument('--shards', nargs='+', required=True)
    p.add_argument('--output', required=True, help='checkpoint file')
    p.add_argument('--train-steps', dest='train_steps', type=int, default=3000)
    p.add_argument('--batch-size', dest='batch_size', type=int, default=8)
    p.add_argument('--lr', type=float, default=1e-3)
    p.add_argument('--dim', type=int, default=64)
    p.add_argument('--layers', type=int, default=4)
    p.add_argument('--heads', type=int, default=4)
    p.add_argument('--seed', type=int)

    p = commands.add_parser('plan', help='build a window plan from caption and timing prompts')
    _add_plan_flags(p)
    p.add_argument('--seconds', type=float, default=10.0)
    p.add_argument('--output', required=True, help='plan JSON file')

    p = commands.add_parser('generate', help='timing-controlled generation of one clip')
    _add_plan_flags(p)
    _add_sampling_flags(p)
    _add_control_flags(p)
    p.add_argument('--seconds', type=float, default=10.0)
    p.add_argument('--no-control', dest='no_control', action='store_true', help='plain text-to-audio')
    p.add_argument('--output', required=True, help='WAV file')

    p = commands.add_parser('generate-long', help='long-form generation beyond the model window')
    _add_plan_flags(p)
    _add_sampling_flags(p)
    _add_control_flags(p)
    _add_longform_flags(p)
    p.add_argument('--lambda', dest='lambda_', type=float, help='reference guidance weight (default 0.2)')
    p.add_argument('--output', required=True, help='WAV file')

    p = commands.add_parser('eval', help='timing metrics with and without control')
    _add_sampling_flags(p)
    _add_control_flags(p)
    p.add_argument('--shard', required=True)
    p.add_argument('--limit', type=int, default=0, help='evaluate the first N clips only')
    p.add_argument('--no-baseline', dest='no_baseline', action='store_true')
    p.add_argument('--output', required=True, help='CSV report')

    p = commands.add_parser('ablate', help='sweep the reference guidance weight')
    _add_plan_flags(p)
    _add_sampling_flags(p)
    _add_control_flags(p)
    _add_longform_flags(p)
    p.add_argument('--lambdas', type=float, nargs='+', default=[0.0, 0.1, 0.2])
    p.add_argument('--seeds', type=int, nargs='+')
    p.add_argument('--output', required=True, help='CSV table')

    p = commands.add_parser('spectrogram', help='render a WAV file to a grayscale image')
    p.add_argument('--input', required=True)
    p.add_argument('--output', required=True, help='PGM image')

    p = commands.add_parser('replay', help='re-run a manifest and verify its outputs')
    p.add_argument('manifest')
    return parser


def run(argv, config: FreeAudioConfig = None, logger: FreeAudioLogger = None) -> int:
    """Run one command and return its exit code; usage errors return 2 instead of exiting"""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else EXIT_CODES['usage']
    args.argv = list(argv)
    app = None
    try:
        config = config or FreeAudioConfig()
        config.with_overrides(**{CONFIG_FLAGS[k]: getattr(args, k) for k in CONFIG_FLAGS if hasattr(args, k)})
        config.validate_config()
        app = FreeAudioApp(config, logger)
        app.logger.log_config(config.snapshot())
        handler = getattr(app, 'cmd_' + args.command.replace('-', '_'))
        return handler(args) or 0
    except Exception as e:
        if app is not None:
            app.discard_pending()
        if app is not None or logger is not None:
            (app.logger if app else logger).log_error(f"{args.command} failed", e)
        else:
            print(f"Error: {e}", file=sys.stderr)
        return exit_code_for(e)


def main(argv=None) -> int:
    """Main entry point"""
    return run(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())

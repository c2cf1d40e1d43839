"""
Logging utility for FreeAudio
Console output stays terse; the log file carries timestamps and levels
"""

import inspect
import logging
from datetime import datetime
from pathlib import Path

FILE_FORMAT = '%(asctime)s | %(levelname)s | %(message)s'
DATE_FORMAT = '%Y-%m-%d %H:%M:%S'
SENSITIVE_MARKERS = ('token', 'password', 'key')
RULE = "-" * 50


def _caller_label(skip: int = 3) -> str:
    """Class.method of the first frame outside this module, or module.function"""
    for frame_info in inspect.stack()[skip:]:
        owner = frame_info.frame.f_locals.get('self')
        if owner is not None and not isinstance(owner, FreeAudioLogger):
            return f"{type(owner).__name__}.{frame_info.function}"
        module = inspect.getmodule(frame_info.frame)
        if module is not None and module.__name__ != __name__:
            return f"{module.__name__}.{frame_info.function}"
    return ''


def _mask(value) -> str:
    if not value:
        return 'None'
    return '*' * 10 + str(value)[-4:]


class FreeAudioLogger:
    """Named logger shared by the CLI and every pipeline component"""

    def __init__(self, log_dir="logs", log_level=logging.INFO, log_to_file=True, name='FreeAudio'):
        self.log_dir = Path(log_dir)
        self.log_level = log_level
        self.logger = logging.getLogger(name)
        self.logger.setLevel(log_level)
        self.logger.propagate = False
        self.logger.handlers.clear()

        self.log_file = None
        if log_to_file:
            self.log_dir.mkdir(parents=True, exist_ok=True)
            self.log_file = self.log_dir / f"freeaudio_{datetime.now().strftime('%Y%m%d_%H%M%S')}.log"
            self._attach(logging.FileHandler(self.log_file, encoding='utf-8'),
                         logging.Formatter(FILE_FORMAT, datefmt=DATE_FORMAT))
        self._attach(logging.StreamHandler(), logging.Formatter('%(message)s'))

        self.debug(f"🎧 FreeAudio logging started (file: {self.log_file or 'console only'})")

    def _attach(self, handler: logging.Handler, formatter: logging.Formatter):
        handler.setLevel(self.log_level)
        handler.setFormatter(formatter)
        self.logger.addHandler(handler)

    def close(self):
        """Detach and close all handlers"""
        for handler in list(self.logger.handlers):
            handler.close()
            self.logger.removeHandler(handler)

    def _emit(self, level: int, message: str, with_caller: bool = True):
        if not self.logger.isEnabledFor(level):
            return
        label = _caller_label() if with_caller else ''
        self.logger.log(level, f"[{label}] {message}" if label else message)

    def debug(self, message):
        self._emit(logging.DEBUG, message)

    def info(self, message):
        self._emit(logging.INFO, message)

    def warning(self, message):
        self._emit(logging.WARNING, message)

    def error(self, message):
        self._emit(logging.ERROR, message)

    def critical(self, message):
        self._emit(logging.CRITICAL, message, with_caller=False)

    def log_config(self, config_dict):
        """Log configuration values; anything that looks like a credential is masked"""
        self.info("⚙️ CONFIGURATION")
        for key, value in config_dict.items():
            sensitive = any(marker in key.lower() for marker in SENSITIVE_MARKERS)
            self.info(f"   {key}: {_mask(value) if sensitive else value}")
        self.info(RULE)

    def log_plan(self, plan):
        self.info(f"🗂️ WINDOW PLAN ({len(plan.windows)} windows, {plan.total_s:.2f}s)")
        self.info(f"   Global caption: {plan.global_caption}")
        for window in plan.windows:
            self.info(f"   <{window.start_s:.2f},{window.end_s:.2f}> {window.recaption or ', '.join(window.events)}")
        self.info(RULE)

    def log_training_step(self, step, loss, lr, grad_norm=None):
        grad_str = f" | grad_norm={grad_norm:.4f}" if grad_norm is not None else ""
        self.info(f"📉 step {step}: loss={loss:.6f} | lr={lr:.3e}{grad_str}")

    def log_sampling_progress(self, step_index, total_steps, timestep):
        self.debug(f"🎛️ DDIM step {step_index + 1}/{total_steps} (t={timestep})")

    def log_metrics(self, metrics, title="METRICS"):
        self.info(f"📊 {title}")
        for key, value in metrics.items():
            self.info(f"   {key}: {value:.6f}" if isinstance(value, float) else f"   {key}: {value}")
        self.info(RULE)

    def log_error(self, error_msg, exception=None):
        """Log an error; FreeAudio errors also report their exit-code category"""
        self.error(f"❌ ERROR: {error_msg}")
        if exception is None:
            return
        self.error(f"   Exception: {exception}")
        self.error(f"   Type: {type(exception).__name__}")
        category = getattr(exception, 'category', None)
        if category:
            self.error(f"   Category: {category}")

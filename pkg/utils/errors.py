"""
Error types shared across the FreeAudio stack
Each error carries a category that the CLI maps to an exit code
"""


class FreeAudioError(Exception):
    """Base class for all FreeAudio errors"""

    category = "internal"


class ConfigError(FreeAudioError, ValueError):
    """Invalid configuration value"""

    category = "input"


class DimensionError(FreeAudioError, ValueError):
    """Shape or size mismatch between arrays"""

    category = "input"


class NumericalError(FreeAudioError, ValueError):
    """Non-finite values where finite values are required"""

    category = "numerical"


class PlanParseError(FreeAudioError, ValueError):
    """A timing prompt entry has no recognizable interval"""

    category = "input"

    def __init__(self, entry: str, message: str = None):
        self.entry = entry
        super().__init__(message or f"No recognizable time interval in entry: {entry!r}")


class PlanRangeError(FreeAudioError, ValueError):
    """Interval bounds are out of order or outside [0, M]"""

    category = "input"


class PlanFileError(FreeAudioError, ValueError):
    """Plan file could not be read or violates plan invariants"""

    category = "input"


class TextEncodingError(FreeAudioError, ValueError):
    """Caption cannot be turned into a text condition"""

    category = "input"


class LayoutError(FreeAudioError, ValueError):
    """Frame layout does not match the batch it is applied to"""

    category = "input"


class HookError(FreeAudioError):
    """Attention hook registration conflict"""

    category = "internal"


class CheckpointError(FreeAudioError):
    """Checkpoint missing, truncated or of an unknown version"""

    category = "missing"


class TrainingDivergedError(FreeAudioError):
    """Training loss became non-finite"""

    category = "numerical"

    def __init__(self, step: int, loss: float, lr: float, grad_norm: float):
        self.step = step
        self.loss = loss
        self.lr = lr
        self.grad_norm = grad_norm
        super().__init__(
            f"Training diverged at step {step}: loss={loss}, lr={lr:.3e}, grad_norm={grad_norm:.3e}"
        )


class LlmError(FreeAudioError):
    """Chat-completion request failed or returned an unusable answer"""

    category = "external"


EXIT_CODES = {
    "usage": 2,
    "input": 3,
    "missing": 4,
    "numerical": 5,
    "external": 6,
    "internal": 1,
}


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the CLI exit code of its category"""
    if isinstance(error, FileNotFoundError):
        return EXIT_CODES["missing"]
    category = getattr(error, "category", "internal")
    return EXIT_CODES.get(category, 1)

"""Exception hierarchy shared by every adasharp module.

``InputError`` subclasses describe bad files or mismatched inputs; the CLI maps
them to exit code 3.  Everything else derived from ``AdaSharpError`` is an
internal or tool failure (exit code 1).
"""


class AdaSharpError(Exception):
    pass


class InputError(AdaSharpError):
    """Bad, truncated or inconsistent input data."""


class FormatError(InputError):
    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class TruncationError(FormatError):
    def __init__(self, message, frame_index=None, offset=None):
        if frame_index is not None:
            message = f"{message} in frame {frame_index}"
        super().__init__(message, offset)
        self.frame_index = frame_index


class UnsupportedFormatError(InputError):
    pass


class InvalidMaskError(InputError):
    def __init__(self, message, x=None, y=None):
        if x is not None and y is not None:
            message = f"{message} at pixel (x={x}, y={y})"
        super().__init__(message)
        self.x = x
        self.y = y


class DimensionError(InputError):
    pass


class ScoreImportError(InputError):
    def __init__(self, message, offenders=()):
        super().__init__(message)
        self.offenders = list(offenders)


class ConfigError(AdaSharpError):
    """Invalid configuration or arguments (CLI exit code 2)."""


class ConvergenceError(AdaSharpError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class ArityError(AdaSharpError):
    pass


class OverlapError(AdaSharpError):
    pass


class EncoderError(AdaSharpError):
    def __init__(self, message, stderr=""):
        if stderr:
            message = f"{message}\n--- stderr ---\n{stderr.strip()}"
        super().__init__(message)
        self.stderr = stderr


class EncoderNotFoundError(EncoderError):
    pass


class EncoderOutputError(EncoderError):
    pass


class SweepError(AdaSharpError):
    def __init__(self, message, crf=None):
        if crf is not None:
            message = f"rung crf={crf}: {message}"
        super().__init__(message)
        self.crf = crf

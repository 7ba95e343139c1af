"""Exception types raised across the package."""


class GrinError(Exception):
    pass


class ShapeError(GrinError, ValueError):
    pass


class ModeError(GrinError):
    """Graph smoothing was requested while the stack is in inference mode."""


class StateError(GrinError):
    """A tape was replayed without a completed forward pass."""


class TrainingError(GrinError):
    def __init__(self, message, step=None, path=None):
        super().__init__(message)
        self.step = step
        self.path = path


class FormatError(GrinError):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field

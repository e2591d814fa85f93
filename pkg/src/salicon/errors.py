"""Exception hierarchy shared by every module."""


class SaliconError(Exception):
    """Base class for all errors raised by this package."""


class SizeError(SaliconError):
    pass


class ShapeError(SaliconError):
    pass


class DomainError(SaliconError):
    pass


class GraphError(SaliconError):
    pass


class InputError(SaliconError):
    pass


class StateError(SaliconError):
    pass


class FormatError(SaliconError):
    """Malformed weight file or manifest.

    ``offset`` is the byte position where parsing failed, when known.
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class TransplantError(SaliconError):
    pass


class DecodeError(SaliconError):
    pass


class DatasetError(SaliconError):
    pass


class ConfigError(SaliconError):
    pass


class DivergenceError(SaliconError):
    """Training produced a non-finite loss."""

    def __init__(self, message, epoch=None, index=None, sample_id=None):
        super().__init__(message)
        self.epoch = epoch
        self.index = index
        self.sample_id = sample_id

"""Exception and warning types shared across the engine."""


class MyodecodeError(Exception):
    """Base class for engine errors."""


class ProtocolError(MyodecodeError):
    pass


class BadMagic(ProtocolError):
    """Stream desync: caller must resynchronize by scanning for the magic byte."""


class Truncated(ProtocolError):
    """Not enough bytes for one full frame; await more input."""


class NotFull(MyodecodeError):
    """Operation requires a full frame buffer."""


class WrongShape(MyodecodeError):
    pass


class UnknownMovement(MyodecodeError):
    pass


class UnknownClass(MyodecodeError):
    pass


class TooShort(MyodecodeError):
    """Recording too short to assemble any feature window."""


class MissingGuide(MyodecodeError):
    pass


class EmptyTrain(MyodecodeError):
    pass


class EmptyCalibration(MyodecodeError):
    pass


class DegenerateClass(MyodecodeError):
    """A class is absent from the training split."""


class ShapeMismatch(MyodecodeError):
    pass


class NotCalibrated(MyodecodeError):
    pass


class NoModel(MyodecodeError):
    pass


class CorruptFile(MyodecodeError):
    pass


class VersionMismatch(MyodecodeError):
    """Persisted file schema is not readable by this build."""


class SchemaVersionMismatch(VersionMismatch):
    """Session file written under a different schema version."""


class CatalogMismatchWarning(UserWarning):
    """Movement catalog changed since the model was saved."""


class InvalidTransition(MyodecodeError):
    def __init__(self, command: str, phase: str):
        super().__init__(f"command {command!r} not allowed in phase {phase!r}")
        self.command = command
        self.phase = phase


class DeviceLost(MyodecodeError):
    pass


class PortInUse(MyodecodeError):
    pass

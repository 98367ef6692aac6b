"""Exception hierarchy.

Errors are grouped into three families that map onto CLI exit codes and
service error payloads: config (2), data (3), model (4).
"""


class FtdfError(Exception):
    family = "data"
    exit_code = 3


class ConfigError(FtdfError):
    family = "config"
    exit_code = 2


class DataError(FtdfError):
    family = "data"
    exit_code = 3


class ModelError(FtdfError):
    family = "model"
    exit_code = 4


# --- config family -----------------------------------------------------------

class InvalidSpec(ConfigError):
    pass


class InvalidOverlap(ConfigError):
    pass


class InvalidWindowLength(ConfigError):
    pass


class InvalidFactor(ConfigError):
    pass


class InvalidDuration(ConfigError):
    pass


# --- data family -------------------------------------------------------------

class MalformedRow(DataError):
    def __init__(self, line_number, detail=""):
        self.line_number = line_number
        super().__init__(f"unparseable row at line {line_number}" + (f": {detail}" if detail else ""))


class NonFiniteSample(DataError):
    def __init__(self, index, detail=""):
        self.index = index
        super().__init__(f"non-finite sample at index {index}" + (f": {detail}" if detail else ""))


class EmptyTrace(DataError):
    pass


class TraceTooShort(DataError):
    pass


class IndexOutOfRange(DataError):
    pass


class DegenerateSignal(DataError):
    pass


class InsufficientData(DataError):
    pass


class LagOutOfRange(DataError):
    pass


class PlanMismatch(DataError):
    pass


class TooFewWindows(DataError):
    pass


class ClassTooSmall(DataError):
    pass


class TooFewPerClass(DataError):
    pass


class LengthMismatch(DataError):
    pass


class EmptyCounts(DataError):
    pass


class EmptyDataset(DataError):
    pass


class ShapeMismatch(DataError):
    pass


class KTooLarge(DataError):
    pass


# --- model family ------------------------------------------------------------

class IoError(ModelError):
    pass


class BadMagic(ModelError):
    pass


class VersionUnsupported(ModelError):
    pass


class CorruptModel(ModelError):
    pass

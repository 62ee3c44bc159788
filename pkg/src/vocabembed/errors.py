"""Exception hierarchy. ``exit_code`` is what the CLI returns for each class."""


class VocabEmbedError(Exception):
    exit_code = 1


class ConfigError(VocabEmbedError, ValueError):
    exit_code = 2


class DataFormatError(VocabEmbedError, ValueError):
    exit_code = 3


class ShapeError(DataFormatError):
    pass


class ModelMismatchError(DataFormatError):
    """Model file version or vocabulary fingerprint does not match."""


class DegenerateSampleError(VocabEmbedError, ValueError):
    """All samples identical; the Weibull score equation is undefined."""

    def __init__(self, value):
        super().__init__(f"all samples equal {value!r}")
        self.value = value


class NumericalError(VocabEmbedError, ArithmeticError):
    exit_code = 4

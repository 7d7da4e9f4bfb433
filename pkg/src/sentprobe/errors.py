"""Exception hierarchy shared by all modules."""


class ProbeError(Exception):
    """Base class; the CLI maps these to exit code 1."""


class ConfigurationError(ProbeError, ValueError):
    pass


class DomainError(ProbeError, ValueError):
    pass


class DimensionError(ProbeError, ValueError):
    pass


class FormatError(ProbeError, ValueError):
    pass


class CorpusEncodingError(ProbeError, ValueError):
    def __init__(self, path, line_index, reason):
        super().__init__(f"{path}: line {line_index} is not valid UTF-8 ({reason})")
        self.path = path
        self.line_index = line_index


class EmbeddingLookupError(ProbeError, IndexError):
    pass


class VocabularyMismatchError(ProbeError, ValueError):
    pass


class TrainingError(ProbeError, RuntimeError):
    pass

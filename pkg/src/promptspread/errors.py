"""Exception hierarchy shared across the package."""


class PromptSpreadError(Exception):
    """Base class for every error raised by promptspread."""

    #: short machine-readable tag used in CLI error records
    kind = "error"


class GrammarError(PromptSpreadError):
    kind = "grammar"


class BindingError(GrammarError):
    """A placeholder binding index does not resolve to a value."""

    kind = "binding"


class FormatSpaceExhausted(GrammarError):
    """Fewer distinct valid formats exist than were requested."""

    kind = "exhausted"

    def __init__(self, message, space_size=None):
        super().__init__(message)
        self.space_size = space_size


class ConfigurationError(PromptSpreadError):
    kind = "configuration"


class LoadError(PromptSpreadError):
    """Task file violates the schema; ``path`` is a JSON-path-like locator."""

    kind = "load"

    def __init__(self, message, path="$"):
        super().__init__(f"{path}: {message}")
        self.path = path


class ConversionError(LoadError):
    kind = "conversion"


class EvaluationError(PromptSpreadError):
    kind = "evaluation"


class TransportError(EvaluationError):
    kind = "transport"


class ProtocolError(EvaluationError):
    kind = "protocol"


class CapabilityError(EvaluationError):
    """The endpoint cannot provide what was asked (e.g. token logprobs)."""

    kind = "capability"


class UndefinedStatistic(PromptSpreadError):
    """A statistic was requested on input where it is not defined."""

    kind = "undefined"

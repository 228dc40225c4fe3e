"""Exception hierarchy. ``exit_code`` maps each family onto the CLI's exit status."""


class DnsJackError(Exception):
    exit_code = 4


class InputError(DnsJackError):
    """Unreadable or missing input."""

    exit_code = 2


class FormatError(InputError):
    """Input is readable but not in the declared format."""


class ParseError(FormatError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class DegenerateDataError(DnsJackError):
    """Data is well formed but too small or too uniform for the requested analysis."""

    exit_code = 3


class ParameterError(DnsJackError, ValueError):
    exit_code = 2


class NodeNotFound(DnsJackError, KeyError):
    pass


class FitError(DegenerateDataError):
    pass


class DivergenceError(DegenerateDataError):
    pass


class AssemblyError(DnsJackError):
    pass


class IncompleteCaptureError(InputError):
    pass


class InvariantViolation(DnsJackError):
    exit_code = 4

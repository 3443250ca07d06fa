"""Exception types. Each maps to a CLI exit code."""


class ChargeSimError(Exception):
    exit_code = 1


class ConfigError(ChargeSimError):
    """Invalid configuration; carries every violated constraint at once."""

    exit_code = 2

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class TraceParseError(ChargeSimError):
    exit_code = 3

    def __init__(self, message, lineno=None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class InputError(ChargeSimError):
    exit_code = 3


class AddressError(InputError):
    pass


class MetricError(ChargeSimError):
    exit_code = 3


class InvariantViolation(ChargeSimError):
    exit_code = 4


class TimingProtocolError(InvariantViolation):
    def __init__(self, constraint, deficit, command=None):
        self.constraint = constraint
        self.deficit = deficit
        self.command = command
        super().__init__(f"{constraint} violated by {deficit} cycle(s): {command}")

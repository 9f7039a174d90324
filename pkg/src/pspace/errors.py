"""Exception hierarchy. CLI exit codes hang off these classes."""


class PSpaceError(Exception):
    exit_code = 1


class InvalidArgument(PSpaceError, ValueError):
    exit_code = 2


class ConfigError(PSpaceError, ValueError):
    exit_code = 2


class InfeasibleMapping(InvalidArgument):
    pass


class UnsupportedConfiguration(PSpaceError, NotImplementedError):
    exit_code = 2


class OutOfRange(InvalidArgument):
    pass


class NumericalFailure(PSpaceError, ArithmeticError):
    exit_code = 3

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class FormatError(PSpaceError):
    exit_code = 4


class StaleCache(PSpaceError):
    exit_code = 4

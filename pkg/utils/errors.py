"""Exceptions raised across the toolkit, each mapped to a CLI exit code."""


class DerevError(Exception):
    exit_code = 1


class ConfigError(DerevError, ValueError):
    exit_code = 2


class DataError(DerevError, ValueError):
    exit_code = 3


class NumericalError(DerevError, ArithmeticError):
    exit_code = 4

"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: configuration errors -> 2,
I/O errors -> 3 (plain OSError), numeric failures -> 4.
"""


class LithokitError(Exception):
    """Base class for package errors."""


class ConfigurationError(LithokitError):
    """Invalid configuration value (bad sizes, rule values, model dims)."""


class InputError(LithokitError):
    """Invalid runtime input (shape mismatch, wrong arity, empty sets)."""


class UsageError(LithokitError):
    """Operation invoked outside its supported mode."""


class NumericError(LithokitError):
    """Non-finite loss or other numeric failure during optimization."""

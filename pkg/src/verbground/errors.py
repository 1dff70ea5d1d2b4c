"""Exception hierarchy shared across the toolkit.

Every error carries an ``exit_code`` so the CLI can map failures onto its
documented process exit codes (1 usage, 2 data/validation, 3 numerical)
and an ``error_code`` string used as the machine-parsable stderr prefix.
"""


class VerbGroundError(Exception):
    exit_code = 2
    error_code = "error"


class ParseError(VerbGroundError):
    """Malformed input file; message names the offending line."""

    error_code = "parse"

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class StructuralError(VerbGroundError):
    """Input parsed but violates a structural invariant (e.g. a dependency
    head pointing outside its sentence)."""

    error_code = "structure"


class ConfigError(VerbGroundError):
    """Bad configuration: unknown keys, empty whitelists, missing templates."""

    error_code = "config"


class DataError(VerbGroundError):
    """Runtime data violates an operation precondition."""

    error_code = "data"


class CheckpointError(DataError):
    """Unreadable or inconsistent checkpoint/store file."""

    error_code = "checkpoint"


class NumericalError(VerbGroundError):
    """Non-finite values or failed numerical validation."""

    exit_code = 3
    error_code = "numerical"

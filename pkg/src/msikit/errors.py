"""Error types shared across the pipeline.

The CLI maps these onto exit codes: ConfigError -> 2, OSError -> 3, any
other ValueError / ArithmeticError (domain and precondition failures) -> 4.
"""


class ConfigError(ValueError):
    """Malformed configuration or manifest; message names the field."""

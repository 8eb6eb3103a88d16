"""Exception hierarchy with stable error categories.

Every error carries a ``category`` string that maps onto a CLI exit code
and is the one piece of error metadata exposed across process boundaries:
``argument``/``config`` -> exit 2, ``io`` -> exit 3, ``verify`` -> exit 4.
"""


class GenesisError(Exception):
    category = "error"


class ArgumentError(GenesisError):
    """Bad argument or violated precondition."""

    category = "argument"


class ConfigError(GenesisError):
    """Invalid or unknown configuration."""

    category = "config"


class IoError(GenesisError):
    """Filesystem or container-format failure."""

    category = "io"

    def __init__(self, message, code="io"):
        super().__init__(message)
        self.code = code


class VerifyError(GenesisError):
    """Checksum or replay mismatch: data does not match its record."""

    category = "verify"


EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_VERIFY = 4


def exit_code_for(err: GenesisError) -> int:
    if isinstance(err, (ArgumentError, ConfigError)):
        return EXIT_CONFIG
    if isinstance(err, IoError):
        return EXIT_IO
    if isinstance(err, VerifyError):
        return EXIT_VERIFY
    return EXIT_CONFIG

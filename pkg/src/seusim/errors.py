"""Exception hierarchy shared across the package.

Two broad failure families matter to callers (and to the CLI exit-code
mapping): bad input artifacts (netlists, profiles, stimulus files) and
violations of model/config invariants discovered while running.
"""


class SeuSimError(Exception):
    """Base class for all errors raised by this package."""

    code = "error"


class InputError(SeuSimError):
    """A user-supplied artifact could not be parsed or failed validation."""

    code = "input-error"


class BenchParseError(InputError):
    """Syntax or reference error in a .bench netlist.

    Carries the 1-based source position of the first offending token and,
    when several independent problems were found in one pass, the full list
    as (code, message, line, col) tuples.
    """

    code = "bench-parse-error"

    def __init__(self, message, line=None, col=None, errors=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", col {col}" if col is not None else "") + ")"
        super().__init__(message + loc)
        self.line = line
        self.col = col
        self.errors = errors or []


class ProfileError(InputError):
    """Malformed or physically meaningless technology profile."""

    code = "profile-error"


class StimulusError(InputError):
    """Malformed stimulus file or vectors that do not fit the circuit."""

    code = "stimulus-error"


class InvariantError(SeuSimError):
    """An internal contract was violated (bad config, bad sample, cycle...)."""

    code = "invariant-violation"


class ConfigError(InvariantError):
    """Campaign or simulation configuration that cannot be run."""

    code = "config-error"

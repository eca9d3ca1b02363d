"""Exception types shared by every module; the CLI maps them onto exit codes."""


class SpringsimError(Exception):
    exit_code = 1


class InvalidInput(SpringsimError, ValueError):
    exit_code = 2


class DegenerateState(InvalidInput):
    """Raised when a state carries no energy and cannot be normalized."""


class ResourceLimit(SpringsimError):
    exit_code = 3


class Indeterminate(SpringsimError):
    exit_code = 4

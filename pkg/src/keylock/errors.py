"""Exception types shared across the workbench."""


class KeylockError(Exception):
    pass


# -- netlist parsing / structure ------------------------------------------

class BenchParseError(KeylockError):
    def __init__(self, message, line_no=None, line=None):
        if line_no is not None:
            message = f"line {line_no}: {message}" + (f" [{line.strip()}]" if line else "")
        super().__init__(message)
        self.line_no = line_no


class UnknownGate(BenchParseError):
    pass


class DuplicateDriver(BenchParseError):
    pass


class UndeclaredNet(BenchParseError):
    pass


class ArityMismatch(BenchParseError):
    pass


class CyclicNetlist(KeylockError):
    pass


class CycleUnderKey(KeylockError):
    pass


class TooManyInputs(KeylockError):
    pass


class InsufficientPaths(KeylockError):
    def __init__(self, found, wanted):
        super().__init__(f"only {found} disjoint paths available, {wanted} requested")
        self.found = found
        self.wanted = wanted


class InsufficientNets(KeylockError):
    pass


# -- locking ---------------------------------------------------------------

class BadSize(KeylockError):
    pass


class EmbeddingMismatch(KeylockError):
    pass


class WrongTopology(KeylockError):
    pass


# -- cnf / solver ----------------------------------------------------------

class InterfaceMismatch(KeylockError):
    pass


class MalformedHeader(KeylockError):
    pass


class LiteralOutOfRange(KeylockError):
    pass


# -- preprocessing / attack -----------------------------------------------

class TwistedLogic(KeylockError):
    """The routing block hosts real logic gates and is not a pure selection."""


class BoundViolated(KeylockError):
    pass


class CycleBudgetExceeded(KeylockError):
    def __init__(self, count):
        super().__init__(f"cycle enumeration exceeded budget ({count} cycles)")
        self.count = count


class MatchFailed(KeylockError):
    """Selector assignment is not realizable by the routing network."""

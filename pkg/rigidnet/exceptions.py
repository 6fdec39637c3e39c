"""Exceptions raised by rigidnet.

Three families map onto the command line exit codes: bad input (2),
numerical failures (3) and unmet preconditions (4).
"""


class RigidnetError(Exception):
    """Base class for every error raised by rigidnet."""

    exit_code = 1


class InputError(RigidnetError, ValueError):
    exit_code = 2


class InvalidVertex(InputError):
    pass


class InvalidEdge(InputError):
    pass


class CoincidentPoints(InputError):
    pass


class MissingAngle(InputError):
    pass


class MissingAngleMeasurement(InputError):
    pass


class TooFewPoints(InputError):
    pass


class ScenarioError(InputError):
    """Raised when a scenario or framework file does not match its schema."""


class NumericalError(RigidnetError, ArithmeticError):
    exit_code = 3


class NonFinite(NumericalError):
    pass


class AgentCollision(NumericalError):
    pass


class PreconditionError(RigidnetError):
    exit_code = 4


class Disconnected(PreconditionError):
    pass


class NoPath(PreconditionError):
    pass


class NotISAR(PreconditionError):
    pass


class NotLaman(PreconditionError):
    pass


class DegenerateConfiguration(PreconditionError):
    pass


class DegreeTooLow(PreconditionError):
    pass


class NotAngleConnected(PreconditionError):
    pass


class NotLocalizable(PreconditionError):
    pass


class AssumptionViolated(PreconditionError):
    pass


class NoAdjacentAnchors(PreconditionError):
    pass

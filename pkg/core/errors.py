"""Exception types raised by the toolkit.

Every error derives from ``ValueError`` so callers that only catch
``ValueError`` keep working.
"""

from typing import List, Optional


class AnisurfError(ValueError):
    """Base class for toolkit errors"""


class DomainError(AnisurfError):
    """An argument lies outside the domain of a mathematical function"""


class BoundaryViolation(AnisurfError):
    """An estimator was asked to evaluate too close to the domain boundary"""

    def __init__(self, point, delta: float, message: Optional[str] = None):
        self.point = tuple(float(x) for x in point)
        self.delta = float(delta)
        super().__init__(
            message
            or f"BoundaryViolation: point {self.point} has no 2*delta margin (delta={self.delta:g})"
        )


class EmptyDataset(AnisurfError):
    """The dataset holds no sheets"""


class EmptySheet(AnisurfError):
    """A sheet holds no observations"""


class FactorizationFailed(AnisurfError):
    """The covariance matrix could not be factorized even with jitter"""


class ConfigError(AnisurfError):
    """Inconsistent simulation or experiment configuration"""


class ParseError(AnisurfError):
    """A file could not be parsed"""


class TooFewNodes(AnisurfError):
    """A quadrature rule received fewer than two nodes"""


class TooFewObservations(AnisurfError):
    """Not enough observations for the requested statistic"""


class ValidationError(AnisurfError):
    """A configuration document failed validation.

    ``errors`` holds one ``"<key.path>: <message>"`` entry per violation.
    """

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))

"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
2 for bad input data, 3 for numerical failures, 4 for bad configuration.
"""

from __future__ import annotations


class PkClusterError(ValueError):
    exit_code = 1


class InputError(PkClusterError):
    exit_code = 2


class NumericalError(PkClusterError):
    exit_code = 3


class ConfigError(PkClusterError):
    exit_code = 4


class ParseError(InputError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.line = line
        self.path = path


class CurveValidationError(InputError):
    """Raised when a candidate curve violates an invariant.

    ``curve_id`` and ``index`` point at the offending record and sample.
    """

    def __init__(self, message: str, curve_id: str | None = None, index: int | None = None):
        where = []
        if curve_id is not None:
            where.append(f"curve {curve_id!r}")
        if index is not None:
            where.append(f"index {index}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.curve_id = curve_id
        self.index = index


class NonIncreasingTimes(CurveValidationError):
    pass


class NegativeConcentration(CurveValidationError):
    pass


class NonFiniteValue(CurveValidationError):
    pass


class NonPositiveDose(CurveValidationError):
    pass


class LengthMismatch(CurveValidationError):
    pass


class EmptyInput(InputError):
    pass


class EmptyIntersection(InputError):
    pass


class IdMismatch(InputError):
    pass


class MissingArtifact(InputError):
    pass


class DegenerateVector(NumericalError):
    pass


class DegenerateRates(NumericalError):
    pass


class InvalidMatrix(NumericalError):
    pass


class KEqualsOne(NumericalError):
    pass


class KOutOfRange(ConfigError):
    pass


class TooManyClusters(ConfigError):
    pass


class InvalidProbability(ConfigError):
    pass


class ZeroWithinDistanceWarning(RuntimeWarning):
    """All points coincide with their cluster centroid; CH reported as +inf."""

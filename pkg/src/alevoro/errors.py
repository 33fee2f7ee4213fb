"""Exception types shared across the solver."""


class AlevoroError(Exception):
    """Base class for solver errors."""


class CollinearInput(AlevoroError):
    pass


class DuplicatePoint(AlevoroError):
    pass


class OutsideHull(AlevoroError):
    pass


class OpenFan(AlevoroError):
    pass


class DegeneratePolygon(AlevoroError):
    pass


class UnsupportedDegree(AlevoroError):
    pass


class SingularMass(AlevoroError):
    pass


class RankDeficient(AlevoroError):
    pass


class SingularSystem(AlevoroError):
    pass


class NonAdmissibleState(AlevoroError):
    pass


class UnknownCase(AlevoroError):
    pass


class BadConfig(AlevoroError):
    pass


class MaxRestartsExceeded(AlevoroError):
    pass


class NonRecoverableState(AlevoroError):
    pass

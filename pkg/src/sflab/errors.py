"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class SflabError(Exception):
    """Base class for every error raised by the package."""


# linalg
class NotComplementary(SflabError):
    pass


# symbol
class NotElliptic(SflabError):
    pass


class NotHermitian(SflabError):
    pass


class Singular(SflabError):
    pass


class InvalidTheta(SflabError):
    pass


class EndpointMismatch(SflabError):
    pass


# boundary
class SingularT(SflabError):
    pass


class NotTransversal(SflabError):
    pass


class NearSingularT(SflabError):
    pass


class ResolutionTooCoarse(SflabError):
    pass


class NotLagrangian(SflabError):
    pass


# topology
class SeamMismatch(SflabError):
    pass


class NotConverged(SflabError):
    def __init__(self, message: str, component: int | None = None):
        super().__init__(message if component is None else f"component {component}: {message}")
        self.component = component


class GridMismatch(SflabError):
    pass


# spectral flow
class CannotSeparate(SflabError):
    pass


class SectorLeak(SflabError):
    """Weighted crossing count did not land near an integer."""


class JoinMismatch(SflabError):
    pass


class NotUnitary(SflabError):
    pass


# cli
class ConfigError(SflabError):
    pass

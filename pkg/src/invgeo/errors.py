"""Exception types raised across the package."""


class InvGeoError(Exception):
    """Base class for all package errors."""


class ArgumentError(InvGeoError, ValueError):
    """Malformed or inconsistent arguments."""


class NonUniqueGeodesicError(InvGeoError):
    """Two points are too far apart for a unique minimizing geodesic."""


class ResolutionError(InvGeoError):
    """Consecutive samples are too far apart; refine the discretization."""


class ClosureError(InvGeoError):
    """A path or tangent field violates its twisted boundary condition."""


class NotInSubspaceError(InvGeoError):
    """A path fails the membership test of a path subspace."""


class UnsupportedError(InvGeoError):
    """No closed form is available for the requested isometry combination."""


class MissingHomotopyError(InvGeoError):
    """The isometry carries no homotopy-to-identity track."""


class PreconditionError(InvGeoError):
    """A numerical precondition (e.g. a spacing bound) fails."""

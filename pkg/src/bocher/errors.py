"""Engine-wide exception types."""


class BocherError(Exception):
    pass


class DivisionNearZero(BocherError):
    """A denominator came within 1e-6 of zero at a sample point."""


class BranchCutProximity(BocherError):
    """A radicand's argument came within 1e-3 of pi at a sample point."""


class InconclusiveSampling(BocherError):
    """Too many sample points rejected; widen the sampling domain."""


class EssentialSingularity(BocherError):
    """Expression cannot be expanded in powers of eps^(1/2)."""


class ChartMismatch(BocherError):
    pass


class BadPrincipalPart(BocherError):
    pass


class UnregisteredMap(BocherError):
    pass


class UnknownKind(BocherError):
    pass


class NotSpecial(BocherError):
    pass


class DegenerateBasis(BocherError):
    pass


class RankDeficient(BocherError):
    pass


class UnknownSystem(BocherError):
    pass


class UnknownParameter(BocherError):
    pass


class SingularLocus(BocherError):
    pass


class UnsupportedConstraint(BocherError):
    pass


class ReconstructionError(BocherError):
    """A sampled constant could not be identified in Q(i, Z)."""

"""Named numerical failures raised across the package."""


class KobvisError(Exception):
    """Base class; the CLI maps subclasses to exit codes."""

    exit_code = 3


class NoConvergence(KobvisError):
    pass


class OutsideCollar(KobvisError):
    pass


class DegenerateGradient(KobvisError):
    pass


class SliceNotNondegenerate(KobvisError):
    pass


class PreconditionError(KobvisError, ValueError):
    exit_code = 4


class CenterOutside(PreconditionError):
    pass


class OutsideModelDomain(PreconditionError):
    pass


class NodeOutsideDomain(KobvisError):
    pass


class Disconnected(KobvisError):
    pass


class ClassificationMismatch(PreconditionError):
    pass


class SelectionDegenerate(KobvisError):
    pass


class LeftNeighborhood(KobvisError):
    pass


class StepRejection(KobvisError):
    pass


class ShootingFailed(KobvisError):
    pass


class EtaTooLarge(PreconditionError):
    pass


class NodeOutsideAmbient(KobvisError):
    pass


class FitMissing(KobvisError):
    exit_code = 4


class NoNonPseudoconvexPoint(PreconditionError):
    pass

"""Exception hierarchy shared by all holab modules."""

from __future__ import annotations


class HolabError(Exception):
    """Base class for every error raised by holab."""


class ModelError(HolabError):
    """A Hamiltonian family evaluated to something unusable (non-Hermitian, non-finite)."""


class NumericalError(HolabError):
    """A numerical routine failed to converge or lost precision."""


class DomainError(HolabError):
    """An argument lies outside the domain where the operation is defined."""


class DegeneracyError(HolabError):
    """A nondegenerate level was required but the gap is below tolerance."""

    def __init__(self, message: str, gap: float | None = None):
        super().__init__(message)
        self.gap = gap


class IllConditionedOverlapError(NumericalError):
    """Consecutive states in a discrete product are (nearly) orthogonal."""

    def __init__(self, message: str, index: int):
        super().__init__(message)
        self.index = index


class GeometryError(HolabError):
    """A loop or surface violates its structural invariants."""


class AccuracyError(NumericalError):
    """Requested accuracy not reached within the refinement budget."""


class MultipletError(HolabError):
    """A level group is not a valid isolated degenerate multiplet."""


class TransportBreakdownError(NumericalError):
    """Overlap between neighbouring multiplet frames became rank deficient."""


class UndefinedPhaseError(DomainError):
    """A relative phase was requested between orthogonal states."""


class ChartError(NumericalError):
    """Action-angle chart could not be constructed."""


class AdiabaticityError(NumericalError):
    """A slow-cycle simulation drifted too far from adiabatic behaviour."""


class PeriodDetectionError(NumericalError):
    """A trajectory that should be periodic did not close within the horizon."""


class SingularityError(NumericalError):
    """A matrix that must be invertible became singular."""


class LabelError(DomainError):
    """Diophantine gap label has no unique admissible solution."""


class ConfigError(HolabError):
    """Scenario configuration failed schema validation."""

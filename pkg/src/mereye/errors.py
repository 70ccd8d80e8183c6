"""Exception types shared across the package."""

from __future__ import annotations


class MereyeError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(MereyeError):
    """Invalid or inconsistent run configuration."""


class GridMismatchError(MereyeError):
    """Waveform sample step is incompatible with a model's internal step."""


class EdgeOrderError(MereyeError):
    """Jitter offsets would reorder (or nearly collide) adjacent edges."""


class DegenerateJitterError(MereyeError):
    """A zero-sigma random-jitter distribution was used where a density is required."""


class WindowRangeError(MereyeError):
    """Requested window or query point lies outside the available span."""


class NoPropagationError(MereyeError):
    """The system output never crossed mid-swing for an isolated input edge."""


class NonSettlingError(MereyeError):
    """A driver stage failed to settle within the allotted horizon."""


class OrderNotConvergedError(MereyeError):
    """Effect-order scan hit max order with the distance still above threshold.

    Carries the partial per-order distance report so callers can emit it.
    """

    def __init__(self, message: str, probed_orders, distances, counts):
        super().__init__(message)
        self.probed_orders = list(probed_orders)
        self.distances = list(distances)
        self.counts = list(counts)


class BudgetExceededError(MereyeError):
    """A simulation-count budget would be exceeded."""

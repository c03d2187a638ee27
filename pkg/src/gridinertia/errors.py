"""Exception hierarchy.

Every error raised by this package derives from :class:`GridInertiaError`,
so callers can catch one type at the boundary.  The CLI maps subtrees to
exit codes: usage/config problems -> 1, data-format problems -> 2,
numerical failures -> 3.
"""


class GridInertiaError(Exception):
    """Base class for all package errors."""


class ConfigError(GridInertiaError):
    """Bad configuration value, unknown key, or invalid CLI usage."""


class CaseFormatError(GridInertiaError):
    """Malformed or inconsistent grid case (in memory or on disk)."""


class BundleFormatError(GridInertiaError):
    """Dataset bundle is malformed, truncated, or fails its checksums."""


class CheckpointFormatError(GridInertiaError):
    """Model checkpoint is malformed or incompatible with the data."""


class SimulationError(GridInertiaError):
    """Simulation could not be run (singular network, bad probe, ...)."""


class SimulationDiverged(SimulationError):
    """Integration left the small-signal validity region."""

    def __init__(self, message, t=None, machine=None):
        super().__init__(message)
        self.t = t
        self.machine = machine


class PipelineError(GridInertiaError):
    """Signal-conditioning step received data it cannot repair."""


class AssemblyError(GridInertiaError):
    """Dataset assembly failed; carries the sweep point that failed."""

    def __init__(self, message, h=None, p_e=None):
        super().__init__(message)
        self.h = h
        self.p_e = p_e


class TrainingDiverged(GridInertiaError):
    """Validation loss exploded and stayed inflated."""


class SelectionError(GridInertiaError):
    """Feature-selection wrapper could not score any candidate."""


class PlacementError(GridInertiaError):
    """PMU placement search failed or was given an infeasible instance."""

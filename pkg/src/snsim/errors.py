"""Exception types shared across the simulation and analysis modules."""


class SimulationError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(SimulationError):
    """Invalid configuration or incompatible inputs.

    Carries the full list of problems found so a user can fix a config
    file in one pass instead of one error at a time.
    """

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class GridMismatchError(ConfigError):
    """Two fields that must share a grid do not."""


class DegenerateInputError(SimulationError):
    """An input field has zero norm where a positive norm is required."""


class BoundaryLeakError(SimulationError):
    """A propagated field reached the domain boundary above tolerance."""

    def __init__(self, t, edge_fraction, threshold):
        self.t = t
        self.edge_fraction = edge_fraction
        self.threshold = threshold
        super().__init__(
            f"boundary density fraction {edge_fraction:.3e} exceeds "
            f"{threshold:.1e} at t={t:.6g}; enlarge the domain"
        )


class ExtractionError(SimulationError):
    """Soliton extraction failed (ratio not supported by the pilot wave)."""


class ConvergenceError(SimulationError):
    """An iterative solver did not reach its tolerance.

    The energy history is attached for diagnosis.
    """

    def __init__(self, message, history=None):
        self.history = list(history) if history is not None else []
        super().__init__(message)

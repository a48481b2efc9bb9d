"""Exception types shared across the package."""


class HypersinhError(Exception):
    """Base class for all package-specific errors."""


class CutoffExceedsGrid(HypersinhError):
    """Frequency cutoff N does not fit inside the grid band |n| <= M/2."""


class NegativeTime(HypersinhError):
    """Propagation requested for t < 0."""


class OnLightCone(HypersinhError):
    """Wave kernel evaluated exactly on the light cone |x| = |t|."""


class SingularPoint(HypersinhError):
    """Kernel evaluated on an excluded singular locus."""


class EmptyRegion(HypersinhError):
    """No grid cell lies inside the requested region."""


class ParameterOutOfRange(HypersinhError):
    """A parameter violates the admissible range of the operation."""


class NonFinite(HypersinhError):
    """A field overflowed or produced NaN during time stepping."""

    def __init__(self, message: str, time: float | None = None):
        super().__init__(message)
        self.time = time


class MismatchedNoise(HypersinhError):
    """Coupled paths were generated from different noise streams."""


class AcceptanceTimeout(HypersinhError):
    """Rejection sampler exhausted its attempt budget."""

    def __init__(self, message: str, acceptance_rate: float, attempts: int):
        super().__init__(message)
        self.acceptance_rate = acceptance_rate
        self.attempts = attempts


class WorkerFailure(HypersinhError):
    """An ensemble worker failed; carries the substream id for replay."""

    def __init__(self, message: str, substream_id: int):
        super().__init__(message)
        self.substream_id = substream_id


class NonPositiveData(HypersinhError):
    """Power-law fit requires strictly positive abscissae and estimates."""


class FocusingNotNormalizable(HypersinhError):
    """Gibbs sampling requested with iota < 0 (measure not normalizable)."""

"""Exception types shared across the package."""


class CrowdschedError(Exception):
    """Base class for all package errors."""


class ConfigError(CrowdschedError):
    """Invalid or malformed configuration; carries the offending key path."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class EmptyWorkerSetError(CrowdschedError):
    """Expected accuracy requested for an empty worker set."""


class EvenSetNotComparableError(CrowdschedError):
    """Majority accuracy requested for an even-sized set outside the cross-check mode."""


class BadChoiceCountError(CrowdschedError):
    """Choice count below 2."""


class BadPriorError(CrowdschedError):
    """Bayesian priors are unusable (non-positive, zero-sum, or wrong length)."""


class UnusableWorkerError(CrowdschedError):
    """Worker accuracy cannot be clamped above chance for a multi-choice task."""


class EmptyTestError(CrowdschedError):
    """Qualification record with no testing tasks."""


class EmptyCohortError(CrowdschedError):
    """Testing-task difficulty requested with no graded workers."""


class DegenerateWeightsError(CrowdschedError):
    """All testing-task difficulty weights are zero."""


class NoHistoryError(CrowdschedError):
    """Response-time prediction requested with no history."""


class NoAssigneesError(CrowdschedError):
    """Task difficulty requested before any worker responded."""


class BadCategoryStatsError(CrowdschedError):
    """Category mean response time is not positive."""

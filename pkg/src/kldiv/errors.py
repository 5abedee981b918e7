"""Exception hierarchy for the kldiv package.

The split matters operationally: configuration and data-format problems
(`ConfigError`, `DataError`) indicate bad inputs and map to CLI exit code 1,
while `EstimationError` and its subclasses indicate that a statistically
valid computation could not be carried out on otherwise well-formed data
(CLI exit code 2).  The subsampling layer catches `EstimationError` to count
failed replicates, so estimators must signal data-dependent failure modes
(duplicates, empty strata, ...) through that branch of the hierarchy.
"""


class KldivError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(KldivError):
    """Invalid configuration: unknown model names, bad grids, malformed JSON."""


class DataError(KldivError):
    """Malformed input data: CSV parse failures, schema mismatches, missing cells
    where complete observations are required."""


class ModelError(KldivError):
    """A covariate distribution model cannot be fitted or sampled."""


class EstimationError(KldivError):
    """A divergence estimate cannot be computed on the given samples."""


class DuplicatePointsError(EstimationError):
    """Exactly coincident points make nearest-neighbour estimation ill-defined.

    Attributes
    ----------
    which : str
        Which sample contains the coincidence: "x", "y" or "x/y" (across samples).
    pair : tuple of int
        Row indices of one offending pair.
    """

    def __init__(self, which, pair):
        self.which = which
        self.pair = tuple(int(i) for i in pair)
        super().__init__(
            f"coincident points in sample {which!r} at rows {self.pair[0]} and "
            f"{self.pair[1]}; deduplicate the data first"
        )


class DivergenceInfiniteError(EstimationError):
    """A discrete outcome has positive p-frequency but zero q-frequency,
    making the plug-in divergence infinite."""

    def __init__(self, key):
        self.key = key
        super().__init__(
            f"discrete combination {key!r} occurs in x but not in y; "
            "the estimated divergence is infinite"
        )


class StratumError(EstimationError):
    """A stratum is too small for the continuous estimator."""

    def __init__(self, key, n_stratum):
        self.key = key
        self.n_stratum = int(n_stratum)
        super().__init__(
            f"stratum {key!r} has only {n_stratum} x-row(s); at least 2 are "
            "required for nearest-neighbour estimation"
        )


class SubsamplingError(EstimationError):
    """Too many subsampling replicates failed to produce an estimate.

    Attributes
    ----------
    failures : int
        Number of failed replicates.
    total : int
        Total number of replicates attempted.
    """

    def __init__(self, message, failures=0, total=0):
        self.failures = int(failures)
        self.total = int(total)
        super().__init__(message)

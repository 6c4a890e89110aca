"""Exception types raised across the library."""


class DiracInvError(Exception):
    """Base class for library errors."""


class GridMismatch(DiracInvError, ValueError):
    pass


class NearPole(DiracInvError):
    """s(lambda) is numerically singular, so m(lambda) is undefined there."""

    def __init__(self, lam, sigma_min):
        self.lam = lam
        self.sigma_min = sigma_min
        super().__init__(f"s(lambda) nearly singular at lambda={lam!r} (sigma_min={sigma_min:.3e})")


class MissedRoot(DiracInvError):
    """The multiplicity-weighted eigenvalue count disagrees with (2N+1)r."""

    def __init__(self, found, expected, n_max):
        self.found = found
        self.expected = expected
        self.n_max = n_max
        super().__init__(
            f"found {found} eigenvalues (with multiplicity) in |n| <= {n_max}, expected {expected}"
        )


class ContourTooLarge(DiracInvError):
    pass


class NotConverged(DiracInvError):
    pass


class SingularRow(DiracInvError):
    """A row system of a Nystrom solve is numerically singular."""

    def __init__(self, row, x):
        self.row = row
        self.x = x
        super().__init__(f"row system singular at x={x:.6g} (row {row})")


class EmptyData(DiracInvError, ValueError):
    pass


class FallbackToDense(UserWarning):
    """The fast Krein recursion lost stability and the dense solver was used."""


class StageError(DiracInvError):
    """Failure inside the reconstruction pipeline, tagged with the stage name.

    ``report`` carries whatever diagnostics were gathered before the failure.
    """

    def __init__(self, stage, message, report=None, kind="numerical"):
        self.stage = stage
        self.report = report
        self.kind = kind
        super().__init__(f"[{stage}] {message}")

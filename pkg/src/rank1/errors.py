"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class Rank1Error(Exception):
    exit_code = 1


class ConfigInvalid(Rank1Error):
    exit_code = 2


class StageExhausted(Rank1Error):
    """The requested set does not fit in any stage of the schedule."""

    exit_code = 3


class EmptyWindow(Rank1Error):
    exit_code = 4


class EmptyCheckpoint(Rank1Error):
    exit_code = 5


class CapConflict(Rank1Error):
    exit_code = 6


class CountTooLarge(Rank1Error):
    exit_code = 7


class Degenerate(Rank1Error):
    exit_code = 8


class GapConditionFailed(Rank1Error):
    exit_code = 9


class ScheduleError(Rank1Error):
    exit_code = 10


class WindowTooLarge(Rank1Error):
    exit_code = 11

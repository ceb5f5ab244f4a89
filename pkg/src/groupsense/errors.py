"""Exception types raised across the toolkit.

Every error carries the name of the module that raised it so the CLI can
surface it in its machine-readable error line.
"""


class GroupSenseError(Exception):
    module = "groupsense"

    def to_dict(self):
        return {"error": type(self).__name__, "module": self.module, "message": str(self)}


# core
class CoreError(GroupSenseError):
    module = "core"


class MissingFile(CoreError):
    pass


class MalformedRow(CoreError):
    def __init__(self, path, line, reason):
        self.path = str(path)
        self.line = line
        self.reason = reason
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {reason}")


class DuplicateParticipant(CoreError):
    pass


class NonMonotonicTimestamps(CoreError):
    def __init__(self, participant, path=None):
        self.participant = participant
        super().__init__(f"timestamps not increasing for participant {participant!r}"
                         + (f" ({path})" if path else ""))


class OverlappingMembership(CoreError):
    def __init__(self, participant, second):
        self.participant = participant
        self.second = second
        super().__init__(f"participant {participant!r} in two groups at second {second}")


class NoPositives(GroupSenseError):
    module = "eval"


# preprocess
class PreprocessError(GroupSenseError):
    module = "preprocess"


class TooFewSamples(PreprocessError):
    pass


class AllMissing(PreprocessError):
    def __init__(self, participant, beacon):
        self.participant = participant
        self.beacon = beacon
        super().__init__(f"ceiling beacon {beacon} never observed by {participant!r}")


# proximity
class ProximityError(GroupSenseError):
    module = "proximity"


class UnknownRssi(ProximityError):
    pass


class NonPositiveDistance(ProximityError):
    pass


class DegenerateRange(ProximityError):
    pass


# features
class WindowTooShort(GroupSenseError):
    module = "features"


# gbdt
class GbdtError(GroupSenseError):
    module = "gbdt"


class SingleClass(GbdtError):
    pass


class EmptySchema(GbdtError):
    pass


class SchemaMismatch(GbdtError):
    pass


class EmptyGrid(GbdtError):
    pass


class TooFewPairs(GbdtError):
    pass


# simulator
class InfeasibleDensity(GroupSenseError):
    module = "simulator"


# cli
class ConfigInvalid(GroupSenseError):
    module = "cli"


class InputMissing(GroupSenseError):
    module = "cli"

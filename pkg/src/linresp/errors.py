"""Exception types shared across the package."""


class LinrespError(Exception):
    """Base class; ``code`` is the machine-readable tag used by the CLI."""

    code = "Error"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class OutOfDomain(LinrespError):
    code = "OutOfDomain"


class AmbiguousSide(LinrespError):
    code = "AmbiguousSide"


class AboveCriticalValue(LinrespError):
    code = "AboveCriticalValue"


class InvalidMap(LinrespError):
    code = "InvalidMap"


class NotExpanding(InvalidMap):
    code = "NotExpanding"


class OrbitHitsCritical(LinrespError):
    code = "OrbitHitsCritical"

    def __init__(self, k):
        super().__init__(f"critical orbit returns to c at index {k}")
        self.k = k


class AnchorMismatch(LinrespError):
    code = "AnchorMismatch"


class LengthMismatch(LinrespError):
    code = "LengthMismatch"


class NonExpandingMultiplier(LinrespError):
    code = "NonExpandingMultiplier"


class NoConvergence(LinrespError):
    code = "NoConvergence"

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class S1Disagreement(LinrespError):
    code = "S1Disagreement"


class NotMeanZero(LinrespError):
    code = "NotMeanZero"


class NoGap(LinrespError):
    code = "NoGap"


class MissingDecomposition(LinrespError):
    code = "MissingDecomposition"


class DegenerateBump(LinrespError):
    code = "DegenerateBump"


class NotHorizontal(LinrespError):
    code = "NotHorizontal"


class NotHomeomorphism(LinrespError):
    code = "NotHomeomorphism"


class BranchInconsistency(LinrespError):
    code = "BranchInconsistency"


class NotTangent(LinrespError):
    code = "NotTangent"


class ConfigError(LinrespError):
    code = "ConfigError"

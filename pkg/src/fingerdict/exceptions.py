class FingerDictError(Exception):
    """Base class for every error raised by the fingerdict structures."""
    pass

class KeyNotGreaterThanMax(FingerDictError):
    """Exception raised when a tail append does not exceed the current maximum key."""
    pass

class EmptyStructure(FingerDictError):
    """Exception raised when removing from a structure that holds no keys."""
    pass

class TargetBeyondArray(FingerDictError):
    """Exception raised when a nested-level selection target exceeds the routing array."""
    pass

class KeyAbsent(FingerDictError):
    """Exception raised when a searched or deleted key is not stored."""
    pass

class NotSorted(FingerDictError):
    """Exception raised when input keys are not strictly increasing."""
    pass

class KeyOutOfFingerRange(FingerDictError):
    """Exception raised when an inserted key does not fit between the finger and its successor."""
    pass

class DuplicateKey(FingerDictError):
    """Exception raised when inserting a key that is already stored."""
    pass

class StaleFinger(FingerDictError):
    """Exception raised when a finger handle refers to a key that is no longer stored."""
    pass

class BudgetMismatch(FingerDictError):
    """Exception raised when a pebble-game increaser move does not sum to the budget c."""
    pass

class InvalidSpec(FingerDictError):
    """Exception raised when a workload specification is malformed."""
    pass

class IoFailure(FingerDictError):
    """Exception raised when a report cannot be written."""
    pass

class InvariantViolation(FingerDictError):
    """Exception raised when a structural invariant is found broken after an update."""
    pass

class DivergenceDetected(FingerDictError):
    """Exception raised when a structure disagrees with the lockstep oracle."""

    def __init__(self, message, seed=None, op_index=None, prefix=None):
        super().__init__(message)
        self.seed = seed
        self.op_index = op_index
        self.prefix = list(prefix or [])

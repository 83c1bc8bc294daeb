"""Exception types shared across the package."""


class PercolabError(Exception):
    pass


class ScanCapExceeded(PercolabError):
    """Majority scan found no window with |#1s - #0s| over the threshold."""


class NotCoalesced(PercolabError):
    """CFTP chains failed to coalesce within the depth cap."""

    def __init__(self, depth: int, msg: str = ""):
        self.depth = depth
        super().__init__(msg or f"chains not coalesced at depth {depth}")


class RegionTooSmall(PercolabError):
    pass


class NonMonotoneTails(PercolabError):
    pass


class DualityViolation(PercolabError):
    """Bug sentinel: the crossing/dual-crossing dichotomy failed."""


class InsufficientData(PercolabError):
    pass


class TooLarge(PercolabError):
    """Exact enumeration bound (k+1)^n <= 2^24 exceeded."""


class DegenerateEvent(PercolabError):
    pass


class BracketFailure(PercolabError):
    pass

class HypothesisError(ValueError):
    """A check was asked about a triple outside the hypotheses it covers."""


class VerificationError(RuntimeError):
    """An internal arithmetic cross-check failed. Always a bug."""


class NoSquareRootDatum(ValueError):
    """The fundamental unit has norm -1, so no real square root exists."""


def log2_exact(n: int) -> int:
    """log2 of a positive power of two."""
    if n < 1 or n & (n - 1):
        raise ValueError(f"{n} is not a power of 2")
    return n.bit_length() - 1

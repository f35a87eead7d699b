"""Exception hierarchy shared across the package.

CLI exit codes map onto this hierarchy: ValidationError -> 1,
MissingDataError (and codec failures) -> 2, anything else -> 3.
"""

from __future__ import annotations


class CropshotError(Exception):
    """Base class for all package errors."""


class ValidationError(CropshotError):
    """Invalid input: malformed box, bad config value, manifest violation."""


class MissingDataError(CropshotError):
    """Required data is absent: feature keys, box sources, files."""


class MissingFeaturesError(MissingDataError):
    """One or more feature keys are absent from the store.

    Carries the offending keys so runs abort loudly instead of silently
    substituting features.
    """

    def __init__(self, keys):
        self.keys = list(keys)
        preview = ", ".join(str(k) for k in self.keys[:5])
        more = "" if len(self.keys) <= 5 else f" (+{len(self.keys) - 5} more)"
        super().__init__(f"{len(self.keys)} feature key(s) missing from store: {preview}{more}")


class CodecError(CropshotError):
    """Feature-cache file cannot be decoded."""


class BadMagicError(CodecError):
    """File does not start with the expected cache magic bytes."""


class TruncatedCacheError(CodecError):
    """File ended before the declared records were read."""


class DimensionMismatchError(CodecError):
    """Vector length disagrees with the cache's declared dimension."""


class FeatureNotFoundError(MissingDataError, KeyError):
    """Store lookup of an absent key (distinct from any I/O failure)."""

    def __str__(self):  # KeyError quotes its arg; keep the plain message
        return self.args[0] if self.args else ""


class EmptyMaskError(CropshotError):
    """A segmentation mask contained no true pixels."""

from __future__ import annotations


class OrdmilError(ValueError):
    """Base exception for rejected inputs anywhere in the pipeline."""


class ConfigError(OrdmilError):
    """Raised when a run config fails schema validation."""

"""Weakly supervised ordinal severity scoring.

Frame-level scorers are trained from video-level labels by multiple-instance learning, combined
into an ordinal severity class through a ranked binary ensemble, and evaluated with
cross-validated agreement statistics. See the `ordmil` command for the pipeline stages.
"""

from __future__ import annotations

from ordmil.errors import ConfigError, OrdmilError

from __future__ import annotations

import hashlib

import tomlkit
from tomlkit.items import Table


def config_sha256(config_text: str) -> str:
    """Hex SHA-256 of the raw config text."""
    return hashlib.sha256(config_text.encode("utf-8")).hexdigest()


def provenance_table(config_text: str, seed: int) -> Table:
    """TOML table echoing the run config verbatim, for every TOML output."""
    table = tomlkit.table()
    table["seed"] = seed
    table["config_sha256"] = config_sha256(config_text)
    table["config"] = tomlkit.string(config_text, multiline=True)
    return table

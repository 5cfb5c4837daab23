from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import pytest

from ordmil.dataset import Dataset, SyntheticSpec, generate_synthetic

if TYPE_CHECKING:
    from pathlib import Path

TINY_CONFIG = """\
schema_version = 1
seed = 7

[synthetic]
n_videos = 40
frames_min = 3
frames_max = 6
dim = 4
class_mix = [1, 1, 1, 1]

[cv]
folds = 2

[train]
epochs = 2
lr = 0.01
hidden_dims = [4]

[tune]
binary_grid_step = 0.05
ordinal_grid_step = 0.05

[eval.raters]
frames_per_class = 5

[sweep]
k_values = [1, 3]
"""

QC_CONFIG = """\
seed = 11

[synthetic]
n_videos = 40
frames_min = 5
frames_max = 8
dim = 4
class_mix = [1, 1, 1, 1]
artifact_rate = 0.2

[cv]
folds = 2

[train]
epochs = 2
lr = 0.01
hidden_dims = [4]

[tune]
binary_grid_step = 0.1
ordinal_grid_step = 0.1

[qc]
enabled = true
labeled_frames = 200
"""


@pytest.fixture
def small_spec() -> SyntheticSpec:
    """A quick synthetic spec with well separated classes."""
    return SyntheticSpec(n_videos=60, frames_min=4, frames_max=8, dim=6, seed=3)


@pytest.fixture
def small_dataset(small_spec: SyntheticSpec) -> Dataset:
    return generate_synthetic(small_spec)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_config(tmp_path: Path) -> Path:
    path = tmp_path / "run.toml"
    path.write_text(TINY_CONFIG, encoding="utf-8")
    return path


@pytest.fixture
def qc_config(tmp_path: Path) -> Path:
    path = tmp_path / "qc.toml"
    path.write_text(QC_CONFIG, encoding="utf-8")
    return path

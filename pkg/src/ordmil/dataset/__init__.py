from __future__ import annotations

from .bags import (
    MAX_MES,
    N_CLASSES,
    Dataset,
    DatasetError,
    FrameMatrix,
    FrameVec,
    VideoBag,
    relabel_binary,
)
from .folds import FoldAssignment, grouped_kfold, load_folds, save_folds
from .storage import DatasetFormatError, load_dataset, save_dataset
from .synthetic import FeatureAnchors, SyntheticSpec, apportion, generate_synthetic

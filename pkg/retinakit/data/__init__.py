# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

from .data_utils import DataError, SplitSpec, numpy_seed, stratified_kfold, stratified_split
from .manifest import (
    DEFAULT_CLASSES,
    HEALTHY_LABEL,
    Manifest,
    ManifestRecord,
    compute_dataset_stats,
    filter_quality,
    scan_directory,
)
from .shapes import ANOMALOUS_LABEL, generate_shapes_dataset, render_shape, render_shapes
from .image_dataset import ImageDataset
from .iterators import CountingIterator, EpochBatchIterator

__all__ = [
    'ANOMALOUS_LABEL',
    'CountingIterator',
    'DataError',
    'DEFAULT_CLASSES',
    'EpochBatchIterator',
    'HEALTHY_LABEL',
    'ImageDataset',
    'Manifest',
    'ManifestRecord',
    'SplitSpec',
    'compute_dataset_stats',
    'filter_quality',
    'generate_shapes_dataset',
    'numpy_seed',
    'render_shape',
    'render_shapes',
    'scan_directory',
    'stratified_kfold',
    'stratified_split',
]

# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

import argparse
import importlib.util
import os
import unittest

import numpy as np

from retinakit.autograd import Tensor
from retinakit.data import Manifest, ManifestRecord, generate_shapes_dataset
from retinakit import imaging


SLOW_TESTS = os.environ.get('RETINAKIT_SLOW_TESTS') == '1'


def slow_test(fn):
    """Skip unless ``RETINAKIT_SLOW_TESTS=1``."""
    return unittest.skipUnless(SLOW_TESTS, 'set RETINAKIT_SLOW_TESTS=1 to run')(fn)


def torch_available():
    return importlib.util.find_spec('torch') is not None


def randn(*shape, seed=0, requires_grad=False, dtype=None):
    return Tensor(np.random.RandomState(seed).randn(*shape), requires_grad=requires_grad, dtype=dtype)


def dummy_args(**kwargs):
    return argparse.Namespace(**kwargs)


def write_image(path, pixels):
    os.makedirs(os.path.dirname(path) or '.', exist_ok=True)
    imaging.save_png(pixels, path)
    return path


def constant_image(side, value, width=None):
    return np.full((side, width or side, 3), value, dtype=np.float64)


def make_manifest(counts, classes=None, flagged=0):
    """In-memory manifest with ``counts[(dataset_tag, label)]`` records per
    stratum; the first *flagged* records are marked low quality."""
    records = []
    for (tag, label), n in sorted(counts.items()):
        for i in range(n):
            records.append(ManifestRecord('{}/{}/{:04d}.png'.format(tag, label, i), label, tag, True))
    records = [r._replace(quality_ok=False) if i < flagged else r for i, r in enumerate(records)]
    return Manifest(records, classes=classes)


def make_shapes_corpus(data_dir, n_healthy=12, n_anomalous=12, side=32, seed=0):
    """Shapes corpus in *data_dir*; returns the path of its manifest."""
    generate_shapes_dataset(data_dir, n_healthy, n_anomalous, side=side, seed=seed)
    return os.path.join(data_dir, 'manifest.tsv')


def vit_train_argv(data, save_dir, max_epoch=2, seed=1, extra=()):
    """Command line of a small, fast classifier run on a 32px shapes corpus."""
    return [
        data,
        '--stage', 'vit', '--seed', str(seed), '--save-dir', save_dir,
        '--arch', 'vit_toy', '--image-side', '32', '--patch-size', '8',
        '--embed-dim', '16', '--depth', '1', '--heads', '2', '--mlp-ratio', '2',
        '--batch-size', '4', '--max-epoch', str(max_epoch),
        '--lr', '1e-3', '--lr-scheduler', 'fixed', '--no-progress-bar',
    ] + list(extra)


def ganomaly_train_argv(data, save_dir, max_epoch=1, seed=1, extra=()):
    return [
        data,
        '--stage', 'ganomaly', '--seed', str(seed), '--save-dir', save_dir,
        '--arch', 'ganomaly_tiny', '--variant', 'kl',
        '--batch-size', '4', '--max-epoch', str(max_epoch),
        '--lr', '1e-3', '--lr-scheduler', 'fixed', '--no-progress-bar',
    ] + list(extra)

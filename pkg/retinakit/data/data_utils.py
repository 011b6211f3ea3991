# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

from collections import OrderedDict
import contextlib
import math

import numpy as np


class DataError(ValueError):
    """Unreadable or inconsistent input data (images, manifests, splits)."""
    pass


@contextlib.contextmanager
def numpy_seed(seed):
    """Context manager which seeds the NumPy PRNG with the specified seed and
    restores the state afterward"""
    if seed is None:
        yield
        return
    state = np.random.get_state()
    np.random.seed(seed)
    try:
        yield
    finally:
        np.random.set_state(state)


STRATIFY_CHOICES = ('label', 'label_dataset')


class SplitSpec(object):
    """Validation/test fractions of a stratified split."""

    def __init__(self, val_frac=0.15, test_frac=0.15, seed=0, stratify_by='label_dataset'):
        if not (0 < val_frac < 1 and 0 < test_frac < 1 and val_frac + test_frac < 1):
            raise ValueError('need fractions in (0, 1) with val + test < 1, got {} and {}'.format(
                val_frac, test_frac))
        if stratify_by not in STRATIFY_CHOICES:
            raise ValueError('stratify_by must be one of {}, got {}'.format(STRATIFY_CHOICES, stratify_by))
        self.val_frac = val_frac
        self.test_frac = test_frac
        self.seed = seed
        self.stratify_by = stratify_by

    def __repr__(self):
        return 'SplitSpec(val_frac={}, test_frac={}, seed={}, stratify_by={})'.format(
            self.val_frac, self.test_frac, self.seed, self.stratify_by)


def _floor(x):
    # n * 0.15 may land a hair below an integer
    return int(math.floor(x + 1e-9))


def strata(manifest, stratify_by='label_dataset'):
    """Record indices grouped by (dataset_tag, label) or by label, keys sorted."""
    groups = OrderedDict()
    for i, rec in enumerate(manifest):
        key = (rec.dataset_tag, rec.label) if stratify_by == 'label_dataset' else (rec.label,)
        groups.setdefault(key, []).append(i)
    return OrderedDict((k, groups[k]) for k in sorted(groups))


def stratified_split(manifest, spec):
    """Split *manifest* into (train, valid, test) manifests.

    Inside every stratum ``floor(n * frac)`` records go to validation and to
    test; the remainder goes to train. Records keep their manifest order
    within each part.
    """
    rng = np.random.RandomState(spec.seed)
    parts = ([], [], [])
    for key, indices in strata(manifest, spec.stratify_by).items():
        n = len(indices)
        if n < 3:
            raise DataError('stratum {} has {} records, need at least 3'.format('/'.join(key), n))
        perm = [indices[i] for i in rng.permutation(n)]
        n_val = _floor(n * spec.val_frac)
        n_test = _floor(n * spec.test_frac)
        parts[1].extend(perm[:n_val])
        parts[2].extend(perm[n_val:n_val + n_test])
        parts[0].extend(perm[n_val + n_test:])
    return tuple(manifest.subset(sorted(p)) for p in parts)


def stratified_kfold(manifest, k, seed=0, stratify_by='label_dataset'):
    """Return *k* (train, test) manifest pairs.

    Records of each stratum are shuffled and dealt round-robin to the folds;
    the dealing position carries over between strata so fold sizes differ by
    at most one.
    """
    if k < 2:
        raise ValueError('k-fold needs k >= 2, got {}'.format(k))
    if len(manifest) < k:
        raise DataError('cannot make {} folds from {} records'.format(k, len(manifest)))
    rng = np.random.RandomState(seed)
    fold_of = np.zeros(len(manifest), dtype=np.int64)
    position = 0
    for indices in strata(manifest, stratify_by).values():
        for i in rng.permutation(len(indices)):
            fold_of[indices[i]] = position % k
            position += 1
    folds = []
    for f in range(k):
        test = np.nonzero(fold_of == f)[0].tolist()
        train = np.nonzero(fold_of != f)[0].tolist()
        folds.append((manifest.subset(train), manifest.subset(test)))
    return folds

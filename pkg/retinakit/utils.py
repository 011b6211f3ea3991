# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

import logging
import math
import os
import re
import traceback

import numpy as np

from retinakit.autograd import Tensor


def persistent_write(write_fn, *args, **kwargs):
    """Call *write_fn*, retrying twice on I/O errors before logging the failure."""
    for i in range(3):
        try:
            return write_fn(*args, **kwargs)
        except Exception:
            if i == 2:
                logging.error(traceback.format_exc())


def checkpoint_paths(path, pattern=r'checkpoint(\d+)\.pt'):
    """Retrieves all checkpoints found in `path` directory.

    Checkpoints are identified by matching filename to the specified pattern. If
    the pattern contains groups, the result will be sorted by the first group in
    descending order.
    """
    pt_regexp = re.compile(pattern)
    files = os.listdir(path)

    entries = []
    for i, f in enumerate(files):
        m = pt_regexp.fullmatch(f)
        if m is not None:
            idx = int(m.group(1)) if len(m.groups()) > 0 else i
            entries.append((idx, m.group(0)))
    return [os.path.join(path, x[1]) for x in sorted(entries, reverse=True)]


def item(value):
    if isinstance(value, Tensor):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.item()
    return value


def as_array(value):
    return value.data if isinstance(value, Tensor) else np.asarray(value)


def top_fraction_count(n, frac=0.1):
    """``ceil(frac * n)``, robust to the binary representation of *frac*."""
    return max(1, int(math.ceil(round(n * frac, 9))))


def top_fraction_indices(values, frac=0.1):
    """Flat indices of the ``ceil(frac * n)`` largest entries of *values*.

    Ties are broken by index, the higher index winning, which is the tail of
    a stable ascending sort.
    """
    flat = np.ravel(values)
    k = top_fraction_count(flat.size, frac)
    order = np.argsort(flat, kind='stable')
    return np.sort(order[-k:])


def top_fraction_mask(values, frac=0.1):
    """Boolean map of :func:`top_fraction_indices`, computed per sample when
    *values* has a leading batch axis of 2-D maps."""
    values = np.asarray(values)
    if values.ndim == 3:
        return np.stack([top_fraction_mask(v, frac) for v in values])
    mask = np.zeros(values.size, dtype=bool)
    mask[top_fraction_indices(values, frac)] = True
    return mask.reshape(values.shape)


def minmax_normalize(values):
    """Map *values* to [0, 1]; returns the normalized array and the original range."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    if hi > lo:
        return (values - lo) / (hi - lo), (lo, hi)
    return np.zeros_like(values), (lo, hi)


def float_tuple(value):
    """Parse ``'(0.9, 0.999)'``, ``'0.9,0.999'`` or a sequence into a tuple of floats."""
    if isinstance(value, str):
        parts = [p for p in value.strip().strip('()[]').split(',') if p.strip()]
    else:
        parts = list(value)
    try:
        return tuple(float(p) for p in parts)
    except (TypeError, ValueError):
        raise ValueError('expected a comma-separated list of numbers, got {!r}'.format(value))

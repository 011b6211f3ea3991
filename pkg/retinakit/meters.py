# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

import time

import numpy as np


class AverageMeter(object):
    """Running (sample-weighted) mean of a scalar statistic."""

    def __init__(self):
        self.reset()

    def reset(self):
        self.val = 0
        self.avg = 0
        self.sum = 0
        self.count = 0

    def update(self, val, n=1):
        self.val = val
        self.sum += val * n
        self.count += n
        self.avg = self.sum / self.count if self.count > 0 else 0


class TimeMeter(object):
    """Average number of events (e.g. images) per second."""

    def __init__(self, init=0):
        self.reset(init)

    def reset(self, init=0):
        self.init = init
        self.start = time.time()
        self.n = 0

    def update(self, val=1):
        self.n += val

    @property
    def avg(self):
        return self.n / self.elapsed_time

    @property
    def elapsed_time(self):
        return self.init + (time.time() - self.start)


class StopwatchMeter(object):
    """Accumulated wall-clock duration of a repeated event."""

    def __init__(self):
        self.reset()

    def start(self):
        self.start_time = time.time()

    def stop(self, n=1):
        if self.start_time is not None:
            self.sum += time.time() - self.start_time
            self.n += n
            self.start_time = None

    def reset(self):
        self.sum = 0
        self.n = 0
        self.start_time = None

    @property
    def avg(self):
        return self.sum / self.n if self.n > 0 else 0


class ConfusionMeter(object):
    """Accumulates a (true class x predicted class) count matrix, optionally
    split by dataset tag."""

    def __init__(self, num_classes):
        self.num_classes = num_classes
        self.reset()

    def reset(self):
        self.matrix = np.zeros((self.num_classes, self.num_classes), dtype=np.int64)
        self.by_tag = {}

    def update(self, targets, predictions, tags=None):
        targets = np.asarray(targets, dtype=np.int64)
        predictions = np.asarray(predictions, dtype=np.int64)
        assert targets.shape == predictions.shape, 'targets/predictions length mismatch'
        np.add.at(self.matrix, (targets, predictions), 1)
        if tags is not None:
            for tag, t, p in zip(tags, targets, predictions):
                if tag not in self.by_tag:
                    self.by_tag[tag] = np.zeros_like(self.matrix)
                self.by_tag[tag][t, p] += 1

    @property
    def avg(self):
        """Accuracy so far."""
        total = self.matrix.sum()
        return float(np.trace(self.matrix)) / total if total > 0 else 0.

# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

import itertools

import numpy as np

from . import data_utils


class CountingIterator(object):
    """Wrapper around an iterable that maintains the iteration count.

    Args:
        iterable (iterable): iterable to wrap
        length (int): number of elements *iterable* yields

    Attributes:
        count (int): number of elements consumed from this iterator
    """

    def __init__(self, iterable, length):
        self.iterable = iterable
        self.count = 0
        self.itr = iter(self)
        self.len = length

    def __len__(self):
        return self.len

    def __iter__(self):
        for x in self.iterable:
            self.count += 1
            yield x

    def __next__(self):
        return next(self.itr)

    def has_next(self):
        """Whether the iterator has been exhausted."""
        return self.count < len(self)

    def skip(self, num_to_skip):
        """Fast-forward the iterator by skipping *num_to_skip* elements."""
        next(itertools.islice(self.itr, num_to_skip, num_to_skip), None)
        self.len -= num_to_skip
        return self


class EpochBatchIterator(object):
    """A multi-epoch iterator over an :class:`ImageDataset`.

    Sample order is reshuffled every epoch from ``seed + epoch`` so that
    resuming from a checkpoint replays the same batches.

    Args:
        dataset (ImageDataset): dataset from which to load the data
        batch_size (int): samples per batch (the last batch may be smaller)
        seed (int, optional): seed for the shuffling order (default: 1)
    """

    def __init__(self, dataset, batch_size, seed=1):
        if batch_size < 1:
            raise ValueError('batch_size must be positive, got {}'.format(batch_size))
        self.dataset = dataset
        self.batch_size = batch_size
        self.seed = seed
        self.epoch = 0
        self._cur_epoch_itr = None

    def __len__(self):
        return (len(self.dataset) + self.batch_size - 1) // self.batch_size

    def next_epoch_itr(self, shuffle=True):
        """Return a new iterator over the dataset for the next epoch."""
        self.epoch += 1
        self._cur_epoch_itr = self._get_iterator_for_epoch(self.epoch, shuffle)
        return self._cur_epoch_itr

    def end_of_epoch(self):
        """Returns whether the most recent epoch iterator has been exhausted"""
        return not self._cur_epoch_itr.has_next()

    def batch_indices(self, epoch, shuffle=True):
        if shuffle:
            with data_utils.numpy_seed(self.seed + epoch):
                order = np.random.permutation(len(self.dataset))
        else:
            order = np.arange(len(self.dataset))
        return [order[i:i + self.batch_size].tolist() for i in range(0, len(order), self.batch_size)]

    def state_dict(self):
        """Returns a dictionary containing a whole state of the iterator."""
        return {'epoch': self.epoch}

    def load_state_dict(self, state_dict):
        """Copies the state of the iterator from the given *state_dict*."""
        self.epoch = state_dict['epoch']

    def _get_iterator_for_epoch(self, epoch, shuffle):
        batches = self.batch_indices(epoch, shuffle)
        dataset = self.dataset
        dataset.set_epoch(epoch)

        def _gen():
            for indices in batches:
                yield dataset.collater([dataset[i] for i in indices])

        return CountingIterator(_gen(), len(batches))

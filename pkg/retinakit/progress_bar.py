# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

"""
Progress output of the training and validation loops.

Every bar prefixes its lines with ``| epoch NNN`` and shares one way of
formatting meters and per-dataset statistics; tqdm is only used when
stderr is a terminal.
"""

from collections import OrderedDict
from collections.abc import Mapping
import json
from numbers import Number
import sys

from tqdm import tqdm

from retinakit.meters import AverageMeter, ConfusionMeter, StopwatchMeter, TimeMeter


LOG_FORMATS = ('json', 'none', 'simple', 'tqdm')

_METERS = (AverageMeter, ConfusionMeter, StopwatchMeter, TimeMeter)


def build_progress_bar(args, iterator, epoch=None, prefix=None, default='tqdm', no_progress_bar='none'):
    log_format = args.log_format
    if log_format is None:
        log_format = no_progress_bar if args.no_progress_bar else default
    if log_format == 'tqdm' and not sys.stderr.isatty():
        log_format = 'simple'

    if log_format == 'json':
        return JsonProgressBar(iterator, epoch, prefix, args.log_interval)
    if log_format == 'simple':
        return SimpleProgressBar(iterator, epoch, prefix, args.log_interval)
    if log_format == 'tqdm':
        return TqdmProgressBar(iterator, epoch, prefix)
    if log_format == 'none':
        return NoopProgressBar(iterator, epoch, prefix)
    raise ValueError('unknown log format {!r}, expected one of {}'.format(log_format, ', '.join(LOG_FORMATS)))


def flatten_stats(stats, skip=('sample_size',)):
    """Printable entries of *stats*, in order.

    A nested mapping such as ``by_dataset`` contributes one
    ``<key>/<name>`` entry per item. ``None`` and non-scalar values
    (arrays, prediction lists) are dropped.
    """
    flat = OrderedDict()
    for key, value in stats.items():
        if key in skip:
            continue
        if isinstance(value, Mapping):
            for name, v in value.items():
                if _is_stat(v):
                    flat['{}/{}'.format(key, name)] = v
        elif _is_stat(value):
            flat[key] = value
    return flat


def _is_stat(value):
    return isinstance(value, _METERS) or (isinstance(value, Number) and not isinstance(value, bool))


def stat_value(stat):
    """Plain number shown for a meter or a scalar."""
    if isinstance(stat, (AverageMeter, ConfusionMeter)):
        return round(stat.avg, 3)
    if isinstance(stat, TimeMeter):
        return round(stat.avg)
    if isinstance(stat, StopwatchMeter):
        return round(stat.sum)
    # numpy scalars are not JSON serializable
    return stat.item() if hasattr(stat, 'item') else stat


def format_stat(stat):
    if isinstance(stat, (AverageMeter, ConfusionMeter)):
        return '{:.3f}'.format(stat.avg)
    if isinstance(stat, _METERS) or isinstance(stat, Number):
        return '{:g}'.format(stat_value(stat))
    return str(stat)


class ProgressBar(object):
    """Iterates over *iterable* and reports statistics every *log_interval*
    batches and once at the end of the epoch."""

    def __init__(self, iterable, epoch=None, prefix=None, log_interval=None):
        self.iterable = iterable
        self.epoch = epoch
        self.log_interval = log_interval
        self.stats = None
        self.prefix = ''
        if epoch is not None:
            self.prefix += '| epoch {:03d}'.format(epoch)
        if prefix is not None:
            self.prefix += ' | {}'.format(prefix)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        return False

    def __iter__(self):
        size = len(self.iterable)
        for i, batch in enumerate(self.iterable):
            yield batch
            if self.stats is not None and self.log_interval and i > 0 and i % self.log_interval == 0:
                self._emit_interval(i, size)

    def log(self, stats):
        """Remember the latest running statistics."""
        self.stats = flatten_stats(stats)

    def print(self, stats, tag=''):
        """Report end-of-epoch statistics of the *tag* split."""
        raise NotImplementedError

    def _emit_interval(self, i, size):
        pass

    @staticmethod
    def _pipes(stats):
        return ' | '.join('{} {}'.format(k, format_stat(v)) for k, v in flatten_stats(stats).items())


class NoopProgressBar(ProgressBar):
    """No output."""

    def print(self, stats, tag=''):
        pass


class SimpleProgressBar(ProgressBar):
    """Line-oriented output for logs and non-TTY environments."""

    def _emit_interval(self, i, size):
        running = ', '.join('{}={}'.format(k, format_stat(v)) for k, v in self.stats.items())
        print('{}:  {:5d} / {:d} {}'.format(self.prefix, i, size, running), flush=True)

    def print(self, stats, tag=''):
        print('{} | {}'.format(self.prefix, self._pipes(stats)), flush=True)


class JsonProgressBar(ProgressBar):
    """One JSON object per report, with numeric values."""

    def _emit_interval(self, i, size):
        update = None if self.epoch is None else round(self.epoch - 1 + i / float(size), 3)
        print(json.dumps(self._record(self.stats, update=update)), flush=True)

    def print(self, stats, tag=''):
        print(json.dumps(self._record(flatten_stats(stats), split=tag or None)), flush=True)

    def _record(self, stats, update=None, split=None):
        record = OrderedDict()
        if self.epoch is not None:
            record['epoch'] = self.epoch
        if update is not None:
            record['update'] = update
        if split is not None:
            record['split'] = split
        record.update((k, stat_value(v)) for k, v in stats.items())
        return record


class TqdmProgressBar(ProgressBar):
    """Interactive bar on stderr."""

    def __init__(self, iterable, epoch=None, prefix=None, log_interval=None):
        super().__init__(iterable, epoch, prefix, log_interval)
        self.tqdm = tqdm(iterable, self.prefix, leave=False)

    def __iter__(self):
        return iter(self.tqdm)

    def log(self, stats):
        super().log(stats)
        self.tqdm.set_postfix(OrderedDict((k, format_stat(v)) for k, v in self.stats.items()), refresh=False)

    def print(self, stats, tag=''):
        self.tqdm.write('{} | {}'.format(self.tqdm.desc, self._pipes(stats)))

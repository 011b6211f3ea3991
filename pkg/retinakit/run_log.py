# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

"""
Per-epoch training records, written as tab-separated text into the save
directory:

- ``runlog.tsv``: epoch, learning rate, train/valid loss and accuracy
- ``dataset_accuracy.tsv``: validation accuracy per dataset tag
- ``loss_curves.tsv``: GANomaly loss components per split

Floats are written with ``repr`` so that values read back compare equal.
"""

from collections import OrderedDict
import os

from retinakit.criterions.ganomaly_loss import LOSS_KEYS


RUNLOG_FIELDS = ('epoch', 'lr', 'num_updates', 'train_loss', 'train_accuracy', 'valid_loss', 'valid_accuracy')
DATASET_FIELDS = ('epoch', 'dataset_tag', 'accuracy')
CURVE_FIELDS = ('epoch', 'split') + LOSS_KEYS


def _format(value):
    if value is None:
        return ''
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse(value):
    if value == '':
        return None
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def read_tsv(path):
    """Read a file written by :class:`RunLog` into a list of dicts."""
    with open(path, 'r', encoding='utf-8') as f:
        lines = f.read().splitlines()
    if not lines:
        return []
    header = lines[0].split('\t')
    return [OrderedDict(zip(header, map(_parse, line.split('\t')))) for line in lines[1:] if line]


class TsvTable(object):
    """Append-only TSV file whose first column is the epoch."""

    def __init__(self, path, fields, start_epoch=0):
        self.path = path
        self.fields = fields
        rows = []
        if start_epoch > 0 and os.path.exists(path):
            # drop records of epochs that will be trained again
            rows = [r for r in read_tsv(path) if r['epoch'] <= start_epoch]
        with open(path, 'w', encoding='utf-8') as f:
            f.write('\t'.join(fields) + '\n')
            for r in rows:
                f.write(self._line(r))

    def _line(self, row):
        return '\t'.join(_format(row.get(k)) for k in self.fields) + '\n'

    def append(self, row):
        with open(self.path, 'a', encoding='utf-8') as f:
            f.write(self._line(row))


class RunLog(object):
    """Learning curves of one training run.

    Args:
        save_dir (str): directory receiving the TSV files
        start_epoch (int): last epoch already trained when resuming; older
            records are kept and later ones discarded
    """

    def __init__(self, save_dir, start_epoch=0):
        os.makedirs(save_dir, exist_ok=True)
        self.save_dir = save_dir
        self.last_epoch = start_epoch
        self.runlog = TsvTable(os.path.join(save_dir, 'runlog.tsv'), RUNLOG_FIELDS, start_epoch)
        self.dataset_accuracy = TsvTable(
            os.path.join(save_dir, 'dataset_accuracy.tsv'), DATASET_FIELDS, start_epoch)
        self.loss_curves = TsvTable(os.path.join(save_dir, 'loss_curves.tsv'), CURVE_FIELDS, start_epoch)

    def log_epoch(self, epoch, lr, num_updates, train_stats, valid_stats=None):
        """Record one epoch from aggregated train and valid logging outputs."""
        assert epoch > self.last_epoch, 'epoch {} logged after epoch {}'.format(epoch, self.last_epoch)
        self.last_epoch = epoch
        valid_stats = valid_stats or {}
        self.runlog.append({
            'epoch': epoch,
            'lr': float(lr),
            'num_updates': num_updates,
            'train_loss': _float(train_stats.get('loss')),
            'train_accuracy': _float(train_stats.get('accuracy')),
            'valid_loss': _float(valid_stats.get('loss')),
            'valid_accuracy': _float(valid_stats.get('accuracy')),
        })
        for tag, acc in valid_stats.get('by_dataset', {}).items():
            self.dataset_accuracy.append({'epoch': epoch, 'dataset_tag': tag, 'accuracy': float(acc)})
        for split, stats in (('train', train_stats), ('valid', valid_stats)):
            if any(k in stats for k in LOSS_KEYS):
                row = {'epoch': epoch, 'split': split}
                row.update((k, _float(stats.get(k))) for k in LOSS_KEYS)
                self.loss_curves.append(row)


def _float(value):
    return None if value is None else float(value)

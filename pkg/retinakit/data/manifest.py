# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

"""
Manifest files list one image per line as tab-separated
``path  label  dataset_tag  quality_ok`` (UTF-8). Lines starting with ``#``
are comments, except for two directives::

    # classes Normal,DR,Glaucoma
    # stats <dataset_tag> <mean> <std>

Relative paths are resolved against the directory holding the manifest.
"""

from collections import Counter, namedtuple, OrderedDict
import os

import numpy as np

from retinakit import imaging
from retinakit.data.data_utils import DataError


DEFAULT_CLASSES = ('Normal', 'DR', 'Glaucoma', 'AMD', 'MS', 'RP', 'DE')
HEALTHY_LABEL = 'Normal'
IMAGE_EXTENSIONS = ('.png', '.ppm', '.jpg', '.jpeg')

ManifestRecord = namedtuple('ManifestRecord', ['path', 'label', 'dataset_tag', 'quality_ok'])


def _parse_bool(value, lineno):
    v = value.strip().lower()
    if v in ('1', 'true', 'yes'):
        return True
    if v in ('0', 'false', 'no'):
        return False
    raise DataError('line {}: quality_ok must be 0/1 or true/false, got {!r}'.format(lineno, value))


class Manifest(object):
    """Ordered, path-unique list of :class:`ManifestRecord` with a class
    vocabulary and optional per-dataset intensity statistics."""

    def __init__(self, records, classes=None, stats=None, root=''):
        self.records = list(records)
        if classes is None:
            classes = list(DEFAULT_CLASSES)
            for rec in self.records:
                if rec.label not in classes:
                    classes.append(rec.label)
        self.classes = list(classes)
        self.stats = OrderedDict(stats or {})
        self.root = root

        seen = set()
        for rec in self.records:
            if rec.label not in self.classes:
                raise DataError('label {} of {} is not in the vocabulary {}'.format(
                    rec.label, rec.path, self.classes))
            if rec.path in seen:
                raise DataError('duplicate path in manifest: {}'.format(rec.path))
            seen.add(rec.path)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, index):
        return self.records[index]

    @property
    def num_classes(self):
        return len(self.classes)

    def label_index(self, label):
        return self.classes.index(label)

    def targets(self):
        return np.array([self.label_index(r.label) for r in self.records], dtype=np.int64)

    def dataset_tags(self):
        return sorted(set(r.dataset_tag for r in self.records))

    def resolve(self, rec):
        if os.path.isabs(rec.path) or not self.root:
            return rec.path
        return os.path.join(self.root, rec.path)

    def counts(self):
        """Records per (dataset_tag, label)."""
        return Counter((r.dataset_tag, r.label) for r in self.records)

    def subset(self, indices):
        return Manifest([self.records[i] for i in indices], classes=self.classes,
                        stats=self.stats, root=self.root)

    def filter(self, predicate):
        return Manifest([r for r in self.records if predicate(r)], classes=self.classes,
                        stats=self.stats, root=self.root)

    def with_stats(self, stats):
        return Manifest(self.records, classes=self.classes, stats=stats, root=self.root)

    def relocated(self, root):
        """Same records with relative paths rewritten against *root*, for
        saving the manifest into another directory."""
        root = os.path.abspath(root)
        records = [
            r if os.path.isabs(r.path) else r._replace(path=os.path.relpath(self.resolve(r), root))
            for r in self.records
        ]
        return Manifest(records, classes=self.classes, stats=self.stats, root=root)

    @classmethod
    def load(cls, path):
        records, classes, stats = [], None, OrderedDict()
        try:
            with open(path, 'r', encoding='utf-8') as f:
                lines = f.read().splitlines()
        except OSError as e:
            raise DataError('cannot read manifest {}: {}'.format(path, e))
        for lineno, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            if line.startswith('#'):
                directive = line[1:].split()
                if directive[:1] == ['classes'] and len(directive) == 2:
                    classes = directive[1].split(',')
                elif directive[:1] == ['stats'] and len(directive) == 4:
                    stats[directive[1]] = (float(directive[2]), float(directive[3]))
                continue
            fields = line.split('\t')
            if len(fields) != 4:
                raise DataError('{} line {}: expected 4 tab-separated columns, got {}'.format(
                    path, lineno, len(fields)))
            records.append(ManifestRecord(
                fields[0], fields[1], fields[2], _parse_bool(fields[3], lineno),
            ))
        return cls(records, classes=classes, stats=stats, root=os.path.dirname(os.path.abspath(path)))

    def save(self, path):
        with open(path, 'w', encoding='utf-8') as f:
            f.write(self.to_string())

    def to_string(self):
        lines = ['# classes ' + ','.join(self.classes)]
        for tag, (mean, std) in self.stats.items():
            lines.append('# stats {} {!r} {!r}'.format(tag, float(mean), float(std)))
        for r in self.records:
            lines.append('\t'.join([r.path, r.label, r.dataset_tag, '1' if r.quality_ok else '0']))
        return '\n'.join(lines) + '\n'

    def __repr__(self):
        return 'Manifest({} records, {} classes)'.format(len(self), self.num_classes)


def filter_quality(manifest, verbose=True):
    """Drop records flagged ``quality_ok = 0`` and report the counts."""
    kept = manifest.filter(lambda r: r.quality_ok)
    if verbose:
        print('| filter_quality: kept {} of {} records ({} flagged)'.format(
            len(kept), len(manifest), len(manifest) - len(kept)), flush=True)
    return kept


def _images_in(directory):
    return sorted(
        name for name in os.listdir(directory)
        if os.path.splitext(name)[1].lower() in IMAGE_EXTENSIONS
    )


def scan_directory(root, classes=None):
    """Build a manifest from ``root/<Class>/*`` (dataset tag = basename of
    *root*) or ``root/<dataset_tag>/<Class>/*``."""
    if not os.path.isdir(root):
        raise DataError('not a directory: {}'.format(root))
    vocab = list(classes) if classes is not None else None
    known = set(vocab if vocab is not None else DEFAULT_CLASSES)
    subdirs = sorted(d for d in os.listdir(root) if os.path.isdir(os.path.join(root, d)))
    if any(d in known for d in subdirs):
        layout = [(os.path.basename(os.path.normpath(root)), '', subdirs)]
    else:
        layout = [
            (tag, tag, sorted(d for d in os.listdir(os.path.join(root, tag))
                              if os.path.isdir(os.path.join(root, tag, d))))
            for tag in subdirs
        ]
    records = []
    for tag, prefix, class_dirs in layout:
        for label in class_dirs:
            for name in _images_in(os.path.join(root, prefix, label)):
                records.append(ManifestRecord(os.path.join(prefix, label, name), label, tag, True))
    return Manifest(records, classes=vocab, root=os.path.abspath(root))


def compute_dataset_stats(manifest, side=224):
    """Mean and standard deviation of standardized pixel values per dataset tag."""
    sums = OrderedDict()
    for rec in manifest:
        pixels = imaging.load_and_standardize(manifest.resolve(rec), side=side).pixels
        s, sq, n = sums.get(rec.dataset_tag, (0., 0., 0))
        sums[rec.dataset_tag] = (s + pixels.sum(), sq + (pixels ** 2).sum(), n + pixels.size)
    stats = OrderedDict()
    for tag in sorted(sums):
        s, sq, n = sums[tag]
        mean = s / n
        std = max(sq / n - mean ** 2, 0.) ** 0.5
        stats[tag] = (mean, std)
    return stats

# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

import os

import numpy as np
from PIL import Image

from retinakit import imaging
from retinakit.data.data_utils import DataError
from retinakit.data.manifest import HEALTHY_LABEL, Manifest, ManifestRecord
from retinakit.data.shapes import lesion_mask_path


class ImageDataset(object):
    """Standardized (and, for training, augmented) images of a manifest.

    Standardized images are cached after the first decode. Training-time
    augmentation draws from the generator of the (epoch, index) stream of
    the policy, so batch composition and worker order never change pixels.

    Args:
        manifest (Manifest): records to serve
        side (int): standardized image side
        policy (AugmentationPolicy, optional): augmentation setup
        train (bool): apply the random augmentations of *policy*
        zscore (bool): normalize with the per-dataset statistics stored in
            the manifest
        samples (list, optional): pre-decoded :class:`ImageSample` objects
            aligned with the manifest records
    """

    def __init__(self, manifest, side=64, policy=None, train=False, zscore=False, samples=None):
        self.manifest = manifest
        self.side = side
        self.policy = policy
        self.train = train
        self.zscore = zscore
        self.epoch = 0
        self._cache = {}
        if samples is not None:
            if len(samples) != len(manifest):
                raise DataError('{} samples for {} manifest records'.format(len(samples), len(manifest)))
            for i, s in enumerate(samples):
                self._cache[i] = s
        if zscore:
            missing = [t for t in manifest.dataset_tags() if t not in manifest.stats]
            if missing:
                raise DataError('no intensity statistics for dataset(s) {}; run `split --stats`'.format(missing))

    @classmethod
    def from_samples(cls, samples, classes, **kwargs):
        records = [
            ManifestRecord('<memory>/{}'.format(i), s.label, s.dataset_tag, s.quality_ok)
            for i, s in enumerate(samples)
        ]
        return cls(Manifest(records, classes=classes), samples=samples, **kwargs)

    def __len__(self):
        return len(self.manifest)

    def set_epoch(self, epoch):
        self.epoch = epoch

    @property
    def num_classes(self):
        return self.manifest.num_classes

    def _lesion_mask(self, rec):
        if rec.label == HEALTHY_LABEL or not self.manifest.root:
            return None
        path = os.path.join(self.manifest.root, lesion_mask_path(rec.path))
        if not os.path.exists(path):
            return None
        with Image.open(path) as img:
            mask = img.convert('L').resize((self.side, self.side), Image.NEAREST)
            return np.asarray(mask) > 127

    def standardized(self, index):
        if index not in self._cache:
            rec = self.manifest[index]
            sample = imaging.load_and_standardize(
                self.manifest.resolve(rec), side=self.side, label=rec.label,
                dataset_tag=rec.dataset_tag, quality_ok=rec.quality_ok,
            )
            sample.lesion_mask = self._lesion_mask(rec)
            self._cache[index] = sample
        return self._cache[index]

    def __getitem__(self, index):
        sample = self.standardized(index)
        if sample.side != self.side:
            raise DataError('{} has side {}, expected {}'.format(sample.path, sample.side, self.side))
        if self.policy is not None:
            rng = self.policy.rng(self.epoch, index) if self.train else None
            sample = self.policy(sample, rng=rng, train=self.train)
        x = sample.pixels.transpose(2, 0, 1)
        tag = self.manifest[index].dataset_tag
        if self.zscore:
            mean, std = self.manifest.stats[tag]
            x = (x - mean) / max(std, 1e-8)
        return {
            'id': index,
            'x': x,
            'target': self.manifest.label_index(self.manifest[index].label),
            'tag': tag,
            'lesion_mask': sample.lesion_mask,
        }

    def collater(self, samples):
        """Merge a list of samples to form a mini-batch."""
        if len(samples) == 0:
            return {}
        masks = [s['lesion_mask'] for s in samples]
        if any(m is None for m in masks):
            masks = None
        else:
            masks = np.stack(masks)
        return {
            'id': np.array([s['id'] for s in samples], dtype=np.int64),
            'nsamples': len(samples),
            'net_input': {'x': np.stack([s['x'] for s in samples])},
            'target': np.array([s['target'] for s in samples], dtype=np.int64),
            'tags': [s['tag'] for s in samples],
            'lesion_mask': masks,
        }

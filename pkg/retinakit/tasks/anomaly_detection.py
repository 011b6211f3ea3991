# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

from retinakit.data import HEALTHY_LABEL

from . import register_task
from .retina_task import RetinaTask


def healthy_only(manifest, split):
    """Drop every record whose label is not the healthy class."""
    kept = manifest.filter(lambda r: r.label == HEALTHY_LABEL)
    excluded = len(manifest) - len(kept)
    if excluded > 0:
        print('| WARNING: excluded {} non-{} records from healthy-only {}'.format(
            excluded, HEALTHY_LABEL, 'training' if split == 'train' else split), flush=True)
    return kept


@register_task('anomaly_detection')
class AnomalyDetectionTask(RetinaTask):
    """
    Train a GANomaly detector on healthy images only.

    The train and valid splits keep only :data:`HEALTHY_LABEL` records;
    the test split keeps every record so that scores of both cohorts can be
    compared and calibrated.
    """

    def __init__(self, args, classes, manifests=None):
        super().__init__(args, classes, manifests=manifests)
        self._filtered = False

    def manifests(self):
        manifests = super().manifests()
        if not self._filtered:
            for split in ('train', 'valid'):
                manifests[split] = healthy_only(manifests[split], split)
            self._filtered = True
        return manifests

    def train_step(self, sample, model, criterion, optimizers):
        """
        Alternate one generator and one discriminator update.

        The discriminator sees the detached reconstruction, so its update
        never reaches the generator parameters.
        """
        model.train()
        gen_optimizer, disc_optimizer = optimizers
        gen_optimizer.zero_grad()
        disc_optimizer.zero_grad()

        losses, x_hat = criterion.generator_step(model, sample)
        gen_optimizer.backward(losses.total)
        gen_optimizer.step()

        # the feature loss also left gradients on the discriminator
        disc_optimizer.zero_grad()
        disc = criterion.discriminator_step(model, sample['net_input']['x'], x_hat)
        disc_optimizer.backward(disc)
        disc_optimizer.step()

        nsamples = sample['nsamples']
        return losses.total, nsamples, criterion.logging_output(losses, disc, nsamples)

# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

import numpy as np

from retinakit import utils
from retinakit.autograd import functional as F

from . import RetinaCriterion, register_criterion


def classification_logging_output(loss, logits, sample):
    target = sample['target']
    predictions = np.argmax(utils.as_array(logits), axis=-1)
    nsamples = len(target)
    return {
        'loss': utils.item(loss) * nsamples,
        'nsamples': nsamples,
        'sample_size': nsamples,
        'ncorrect': int((predictions == target).sum()),
        'predictions': predictions,
        'targets': np.asarray(target),
        'tags': list(sample.get('tags') or []),
    }


def aggregate_classification_outputs(logging_outputs, extra_keys=()):
    nsamples = sum(log.get('nsamples', 0) for log in logging_outputs)
    agg_output = {
        'loss': sum(log.get('loss', 0) for log in logging_outputs) / max(nsamples, 1),
        'accuracy': sum(log.get('ncorrect', 0) for log in logging_outputs) / max(nsamples, 1),
        'nsamples': nsamples,
        'sample_size': nsamples,
    }
    for k in extra_keys:
        agg_output[k] = sum(log.get(k, 0) for log in logging_outputs) / max(nsamples, 1)
    return agg_output


@register_criterion('cross_entropy')
class CrossEntropyCriterion(RetinaCriterion):

    def forward(self, model, sample):
        """Compute the loss for the given sample.

        Returns a tuple with three elements:
        1) the batch-mean cross-entropy
        2) the sample size
        3) logging outputs to display while training
        """
        net_output = model(**sample['net_input'])
        loss = self.compute_loss(model, net_output, sample)
        logging_output = classification_logging_output(loss, net_output, sample)
        return loss, logging_output['sample_size'], logging_output

    def compute_loss(self, model, net_output, sample):
        target = model.get_targets(sample, net_output)
        return F.cross_entropy(net_output, target)

    @staticmethod
    def aggregate_logging_outputs(logging_outputs):
        """Aggregate logging outputs from several batches."""
        return aggregate_classification_outputs(logging_outputs)

# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

from collections import Counter, OrderedDict

from . import register_task
from .retina_task import RetinaTask


def dataset_accuracy(logging_outputs):
    """Accuracy per dataset tag, from the predictions kept in the logging outputs."""
    correct, total = Counter(), Counter()
    for log in logging_outputs:
        for tag, t, p in zip(log.get('tags', []), log.get('targets', []), log.get('predictions', [])):
            total[tag] += 1
            correct[tag] += int(t == p)
    return OrderedDict((tag, correct[tag] / total[tag]) for tag in sorted(total))


@register_task('classification')
class ClassificationTask(RetinaTask):
    """
    Classify fundus images into the classes of the manifest vocabulary.

    Used by the ``vit`` stage and, with the ``masked_vit`` architecture and
    the ``constrained_attention`` criterion, by the ``vit+mask`` stage.

    .. note::

        The classification task is compatible with `retinakit train` and
        `retinakit eval`.
    """

    def aggregate_logging_outputs(self, logging_outputs, criterion):
        agg = criterion.__class__.aggregate_logging_outputs(logging_outputs)
        agg['by_dataset'] = dataset_accuracy(logging_outputs)
        return agg

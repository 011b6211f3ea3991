# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

from retinakit.autograd import Tensor, functional as F
from retinakit.modules import Module


class RetinaModel(Module):
    """Base class for retinakit models.

    ``stage`` names the training stage the model belongs to (``vit``,
    ``vit+mask`` or ``ganomaly``) and is echoed into checkpoint headers.
    """

    stage = None

    def __init__(self):
        super().__init__()
        self.num_updates = 0

    @staticmethod
    def add_args(parser):
        """Add model-specific arguments to the parser."""
        pass

    @classmethod
    def build_model(cls, args, task):
        """Build a new model instance."""
        raise NotImplementedError('RetinaModels must implement the build_model method')

    def get_targets(self, sample, net_output):
        """Get targets from either the sample or the net's output."""
        return sample['target']

    def get_normalized_probs(self, net_output, log_probs):
        """Get normalized probabilities (or log probs) from a net's output."""
        logits = net_output[0] if isinstance(net_output, tuple) else net_output
        if not isinstance(logits, Tensor):
            raise NotImplementedError
        if log_probs:
            return F.log_softmax(logits, axis=-1)
        return F.softmax(logits, axis=-1)

    def optimizer_groups(self):
        """Parameter groups that get their own optimizer, in a fixed order."""
        return [list(self.parameters())]

    @property
    def is_trained(self):
        return self.num_updates > 0

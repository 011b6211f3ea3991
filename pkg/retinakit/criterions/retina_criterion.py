# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.


class RetinaCriterion(object):

    def __init__(self, args, task):
        super().__init__()
        self.args = args
        self.task = task

    @staticmethod
    def add_args(parser):
        """Add criterion-specific arguments to the parser."""
        pass

    @classmethod
    def build_criterion(cls, args, task):
        return cls(args, task)

    def __call__(self, model, sample, **kwargs):
        return self.forward(model, sample, **kwargs)

    def forward(self, model, sample):
        """Compute the loss for the given sample.

        Returns a tuple with three elements:
        1) the loss, a scalar tensor averaged over the batch
        2) the sample size, the number of images in the batch
        3) logging outputs to display while training, with every loss
           summed (not averaged) over the batch
        """
        raise NotImplementedError

    @staticmethod
    def aggregate_logging_outputs(logging_outputs):
        """Aggregate logging outputs from several batches."""
        raise NotImplementedError

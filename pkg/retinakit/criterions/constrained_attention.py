# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

from retinakit import utils
from retinakit.autograd import functional as F

from . import RetinaCriterion, register_criterion
from .cross_entropy import aggregate_classification_outputs, classification_logging_output


def composite_loss(logits, mask_out, target, mask_lambda, normalize_l1=False):
    """Cross-entropy of the masked-image logits plus ``mask_lambda`` times the
    L1 norm of the mask (divided by the pixel count with *normalize_l1*).

    Returns the total loss, the cross-entropy and the penalized L1 term.
    """
    if mask_lambda < 0:
        raise ValueError('mask lambda must be non-negative, got {}'.format(mask_lambda))
    ce = F.cross_entropy(logits, target)
    l1 = mask_out.l1
    if normalize_l1:
        l1 = l1 * (1. / mask_out.num_pixels)
    return ce + l1 * mask_lambda, ce, l1


@register_criterion('constrained_attention')
class ConstrainedAttentionCriterion(RetinaCriterion):
    """Joint objective of the mask network and the classifier it feeds."""

    def __init__(self, args, task):
        super().__init__(args, task)
        if args.mask_lambda < 0:
            raise ValueError('--mask-lambda must be non-negative, got {}'.format(args.mask_lambda))
        self.mask_lambda = args.mask_lambda
        self.normalize_l1 = args.normalize_mask_l1

    @staticmethod
    def add_args(parser):
        """Add criterion-specific arguments to the parser."""
        # fmt: off
        parser.add_argument('--mask-lambda', default=1e-4, type=float, metavar='D',
                            help='weight of the L1 penalty on the attention mask')
        parser.add_argument('--normalize-mask-l1', action='store_true',
                            help='divide the mask L1 norm by the number of pixels')
        # fmt: on

    def forward(self, model, sample):
        logits, mask_out = model(**sample['net_input'])
        target = model.get_targets(sample, logits)
        loss, ce, l1 = composite_loss(logits, mask_out, target, self.mask_lambda, self.normalize_l1)
        logging_output = classification_logging_output(loss, logits, sample)
        nsamples = logging_output['nsamples']
        logging_output['ce_loss'] = utils.item(ce) * nsamples
        logging_output['mask_l1'] = utils.item(l1) * nsamples
        logging_output['mask_mean'] = float(mask_out.mask.data.mean()) * nsamples
        return loss, nsamples, logging_output

    @staticmethod
    def aggregate_logging_outputs(logging_outputs):
        """Aggregate logging outputs from several batches."""
        return aggregate_classification_outputs(logging_outputs, ('ce_loss', 'mask_l1', 'mask_mean'))

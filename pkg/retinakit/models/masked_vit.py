# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

from retinakit.autograd import Tensor

from . import RetinaModel, register_model, register_model_architecture
from .mask_unet import MaskUNet, apply_mask, mask_forward
from .vit import TOY, ViTClassifier, ViTConfig


VIT_ARGS = ('image_side', 'patch_size', 'embed_dim', 'depth', 'heads', 'mlp_ratio')


@register_model('masked_vit')
class MaskedViT(RetinaModel):
    """Mask network and ViT classifier trained jointly: the classifier sees
    ``M * x`` where ``M`` is the mask predicted for ``x``."""

    stage = 'vit+mask'

    def __init__(self, mask_net, classifier):
        super().__init__()
        if mask_net.image_side != classifier.cfg.image_side:
            raise ValueError('mask side {} != classifier side {}'.format(
                mask_net.image_side, classifier.cfg.image_side))
        self.mask_net = mask_net
        self.classifier = classifier

    @staticmethod
    def add_args(parser):
        """Add model-specific arguments to the parser."""
        ViTClassifier.add_args(parser)
        parser.add_argument('--classifier-checkpoint', metavar='FILE',
                            help='checkpoint of a trained vit classifier to start from')

    @classmethod
    def build_model(cls, args, task):
        """Build a new model instance.

        The classifier starts from ``--classifier-checkpoint`` and takes its
        architecture from that checkpoint.
        """
        load = getattr(args, 'load_pretrained', True)
        state = None
        if load:
            if not getattr(args, 'classifier_checkpoint', None):
                raise ValueError('stage vit+mask needs a trained classifier (--classifier-checkpoint)')
            from retinakit import checkpoint_utils
            state = checkpoint_utils.load_checkpoint_to_cpu(args.classifier_checkpoint)
            if state['stage'] != ViTClassifier.stage:
                raise ValueError('{} holds a {} model, expected a vit classifier'.format(
                    args.classifier_checkpoint, state['stage']))
            for k in VIT_ARGS:
                setattr(args, k, getattr(state['args'], k))
        masked_vit_architecture(args)
        classifier = ViTClassifier(ViTConfig.from_args(args, task.num_classes))
        if state is not None:
            classifier.load_state_dict(state['model'])
            print('| initialized classifier from {}'.format(args.classifier_checkpoint), flush=True)
        return cls(MaskUNet(image_side=args.image_side), classifier)

    def forward(self, x, return_mask=True):
        """
        Returns:
            classifier logits for the masked images and, with *return_mask*,
            the :class:`~retinakit.models.mask_unet.MaskOutput`
        """
        x = x if isinstance(x, Tensor) else Tensor(x)
        mask_out = mask_forward(self.mask_net, x)
        logits = self.classifier(apply_mask(mask_out.mask, x))
        if return_mask:
            return logits, mask_out
        return logits


@register_model_architecture('masked_vit', 'masked_vit')
def masked_vit_architecture(args):
    for k in VIT_ARGS:
        setattr(args, k, getattr(args, k, TOY[k]))
    args.classifier_checkpoint = getattr(args, 'classifier_checkpoint', None)


@register_model_architecture('masked_vit', 'masked_vit_toy')
def masked_vit_toy(args):
    masked_vit_architecture(args)

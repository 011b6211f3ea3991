# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

import numpy as np

from retinakit.autograd import ShapeError, Tensor, functional as F
from retinakit.modules import (
    LayerNorm,
    LearnedPositionalEmbedding,
    Linear,
    ModuleList,
    TransformerEncoderLayer,
)
from retinakit.modules.module import normal

from . import RetinaModel, register_model, register_model_architecture


class ViTConfig(object):
    """Vision Transformer hyper-parameters."""

    def __init__(self, image_side=64, patch_size=8, embed_dim=64, depth=4, heads=4, mlp_ratio=4,
                 n_classes=2):
        if image_side % patch_size != 0:
            raise ShapeError('image_side {} is not divisible by patch_size {}'.format(image_side, patch_size))
        if embed_dim % heads != 0:
            raise ShapeError('embed_dim {} is not divisible by heads {}'.format(embed_dim, heads))
        if n_classes < 1:
            raise ValueError('n_classes must be positive, got {}'.format(n_classes))
        self.image_side = image_side
        self.patch_size = patch_size
        self.embed_dim = embed_dim
        self.depth = depth
        self.heads = heads
        self.mlp_ratio = mlp_ratio
        self.n_classes = n_classes

    @classmethod
    def from_args(cls, args, n_classes):
        return cls(
            image_side=args.image_side, patch_size=args.patch_size, embed_dim=args.embed_dim,
            depth=args.depth, heads=args.heads, mlp_ratio=args.mlp_ratio, n_classes=n_classes,
        )

    @property
    def num_patches(self):
        return (self.image_side // self.patch_size) ** 2

    @property
    def patch_dim(self):
        return 3 * self.patch_size ** 2

    def as_dict(self):
        return dict(vars(self))

    def __repr__(self):
        return 'ViTConfig({})'.format(', '.join('{}={}'.format(k, v) for k, v in vars(self).items()))


TOY = dict(image_side=64, patch_size=8, embed_dim=64, depth=4, heads=4, mlp_ratio=4)
B16 = dict(image_side=224, patch_size=16, embed_dim=768, depth=12, heads=12, mlp_ratio=4)


def num_parameters(cfg):
    """Trainable parameter count of :class:`ViTClassifier` for *cfg*, without
    allocating the model."""
    d, t = cfg.embed_dim, cfg.num_patches + 1
    ffn = d * cfg.mlp_ratio
    block = (
        3 * d * d + 3 * d     # in_proj
        + d * d + d           # out_proj
        + d * ffn + ffn       # fc1
        + ffn * d + d         # fc2
        + 2 * 2 * d           # layer norms
    )
    return (
        cfg.patch_dim * d + d  # patch embedding
        + d                    # class token
        + t * d                # position embeddings
        + cfg.depth * block
        + 2 * d                # final norm
        + d * cfg.n_classes + cfg.n_classes
    )


def patchify(x, patch):
    """(B, C, S, S) images -> (B, (S/patch)^2, C * patch^2) tokens.

    Patches are enumerated row-major over the patch grid, each flattened in
    (channel, row, column) order. Accepts tensors or arrays.
    """
    b, c, h, w = x.shape
    if h != w or h % patch != 0:
        raise ShapeError('cannot split a {}x{} image into {}x{} patches'.format(h, w, patch, patch))
    g = h // patch
    if isinstance(x, Tensor):
        x = F.reshape(x, (b, c, g, patch, g, patch))
        x = F.transpose(x, (0, 2, 4, 1, 3, 5))
        return F.reshape(x, (b, g * g, c * patch * patch))
    x = np.asarray(x).reshape(b, c, g, patch, g, patch).transpose(0, 2, 4, 1, 3, 5)
    return np.ascontiguousarray(x.reshape(b, g * g, c * patch * patch))


def unpatchify(tokens, patch, channels=3):
    """Inverse of :func:`patchify`."""
    b, t, dim = tokens.shape
    g = int(round(t ** 0.5))
    if g * g != t or dim != channels * patch * patch:
        raise ShapeError('cannot fold {} tokens of dim {} into {}x{} patches of {} channels'.format(
            t, dim, patch, patch, channels))
    if isinstance(tokens, Tensor):
        x = F.reshape(tokens, (b, g, g, channels, patch, patch))
        x = F.transpose(x, (0, 3, 1, 4, 2, 5))
        return F.reshape(x, (b, channels, g * patch, g * patch))
    x = np.asarray(tokens).reshape(b, g, g, channels, patch, patch).transpose(0, 3, 1, 4, 2, 5)
    return np.ascontiguousarray(x.reshape(b, channels, g * patch, g * patch))


@register_model('vit')
class ViTClassifier(RetinaModel):
    """Vision Transformer classifier with a class-token readout.

    Linear patch embedding, a prepended class token and learned position
    embeddings feed ``depth`` pre-norm encoder blocks; the normalized class
    token goes through a linear head.
    """

    stage = 'vit'

    def __init__(self, cfg):
        super().__init__()
        self.cfg = cfg
        d = cfg.embed_dim
        self.patch_embed = Linear(cfg.patch_dim, d)
        self.cls_token = normal((1, 1, d), std=0.02)
        self.embed_positions = LearnedPositionalEmbedding(cfg.num_patches + 1, d)
        self.layers = ModuleList([
            TransformerEncoderLayer(d, cfg.heads, d * cfg.mlp_ratio, normalize_before=True)
            for _ in range(cfg.depth)
        ])
        self.layer_norm = LayerNorm(d)
        self.head = Linear(d, cfg.n_classes)

    @staticmethod
    def add_args(parser):
        """Add model-specific arguments to the parser."""
        # fmt: off
        parser.add_argument('--image-side', type=int, metavar='N',
                            help='side of the (square) input images')
        parser.add_argument('--patch-size', type=int, metavar='N',
                            help='side of the square patches')
        parser.add_argument('--embed-dim', type=int, metavar='N',
                            help='token embedding dimension')
        parser.add_argument('--depth', type=int, metavar='N',
                            help='number of transformer blocks')
        parser.add_argument('--heads', type=int, metavar='N',
                            help='number of attention heads')
        parser.add_argument('--mlp-ratio', type=int, metavar='N',
                            help='hidden size of the MLP relative to the embedding dimension')
        # fmt: on

    @classmethod
    def build_model(cls, args, task):
        """Build a new model instance."""
        base_architecture(args)
        return cls(ViTConfig.from_args(args, task.num_classes))

    def _check_input(self, x):
        s = self.cfg.image_side
        if x.ndim != 4 or x.shape[1] != 3 or x.shape[2] != s or x.shape[3] != s:
            raise ShapeError('expected (B, 3, {s}, {s}) images, got {shape}'.format(s=s, shape=x.shape))

    def extract_features(self, x):
        """Returns the normalized token states and the inner states: the
        embedded tokens followed by the output of every block."""
        x = x if isinstance(x, Tensor) else Tensor(x)
        self._check_input(x)
        bsz = x.shape[0]
        tokens = self.patch_embed(patchify(x, self.cfg.patch_size))
        cls = F.broadcast_to(self.cls_token, (bsz, 1, self.cfg.embed_dim))
        h = self.embed_positions(F.concat([cls, tokens], axis=1))
        inner_states = [h]
        for layer in self.layers:
            h = layer(h)
            inner_states.append(h)
        return self.layer_norm(h), inner_states

    def forward(self, x, return_inner_states=False):
        """
        Args:
            x (Tensor or ndarray): images of shape `(batch, 3, side, side)`

        Returns:
            logits of shape `(batch, n_classes)` and, with
            *return_inner_states*, the embedded tokens followed by the
            output of every block
        """
        h, inner_states = self.extract_features(x)
        logits = self.head(h[:, 0])
        if return_inner_states:
            return logits, inner_states
        return logits

    def max_positions(self):
        return self.embed_positions.max_positions()


@register_model_architecture('vit', 'vit')
def base_architecture(args):
    args.image_side = getattr(args, 'image_side', 64)
    args.patch_size = getattr(args, 'patch_size', 8)
    args.embed_dim = getattr(args, 'embed_dim', 64)
    args.depth = getattr(args, 'depth', 4)
    args.heads = getattr(args, 'heads', 4)
    args.mlp_ratio = getattr(args, 'mlp_ratio', 4)


@register_model_architecture('vit', 'vit_toy')
def vit_toy(args):
    for k, v in TOY.items():
        setattr(args, k, getattr(args, k, v))
    base_architecture(args)


@register_model_architecture('vit', 'vit_b16')
def vit_b16(args):
    for k, v in B16.items():
        setattr(args, k, getattr(args, k, v))
    base_architecture(args)

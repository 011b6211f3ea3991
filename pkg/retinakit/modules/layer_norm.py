# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

from retinakit.autograd import functional as F

from .module import Module, constant


def _affine_shape(num_features, spatial):
    # per-channel affine for (N, C, H, W) maps, per-feature for (..., D) tokens
    return (num_features, 1, 1) if spatial else (num_features,)


class LayerNorm(Module):
    """Layer normalization.

    With ``spatial=True`` statistics are taken per sample over (C, H, W) and
    the affine transform is per channel; otherwise over the last axis.
    """

    def __init__(self, num_features, eps=1e-5, spatial=False):
        super().__init__()
        self.num_features = num_features
        self.eps = eps
        self.spatial = spatial
        self.axes = (1, 2, 3) if spatial else (-1,)
        self.weight = constant(_affine_shape(num_features, spatial), 1.)
        self.bias = constant(_affine_shape(num_features, spatial), 0.)

    def forward(self, x):
        return F.normalize_layer(
            x, 'layer_norm', weight=self.weight, bias=self.bias, axes=self.axes, eps=self.eps,
        )

    def extra_repr(self):
        return '{}, eps={}, spatial={}'.format(self.num_features, self.eps, self.spatial)


class AdaptiveNorm(LayerNorm):
    """Learnable blend between the layer-normalized and the raw activations.

    ``alpha = sigmoid(gate)`` keeps the blend weight in (0, 1); the gate
    starts at 0 so both paths begin equally weighted.
    """

    def __init__(self, num_features, eps=1e-5, spatial=False, init_gate=0.):
        super().__init__(num_features, eps=eps, spatial=spatial)
        self.gate = constant((1,), init_gate)

    @property
    def alpha(self):
        return F.sigmoid(self.gate)

    def forward(self, x):
        return F.normalize_layer(
            x, 'adaptive_norm', weight=self.weight, bias=self.bias, alpha=self.alpha,
            axes=self.axes, eps=self.eps,
        )

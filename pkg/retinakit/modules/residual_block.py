# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

from retinakit.autograd import functional as F

from .conv2d import Conv2d
from .layer_norm import AdaptiveNorm
from .module import Module
from .multihead_attention import MultiheadAttention


class ResidualBlock(Module):
    """Two (AdaptiveNorm -> conv 3x3 -> GELU) units with an additive skip.

    A 1x1 convolution projects the skip path when the channel count changes.
    """

    def __init__(self, in_channels, out_channels):
        super().__init__()
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.norm1 = AdaptiveNorm(in_channels, spatial=True)
        self.conv1 = Conv2d(in_channels, out_channels, 3, padding=1)
        self.norm2 = AdaptiveNorm(out_channels, spatial=True)
        self.conv2 = Conv2d(out_channels, out_channels, 3, padding=1)
        if in_channels != out_channels:
            self.skip = Conv2d(in_channels, out_channels, 1)
        else:
            self.skip = None

    def forward(self, x):
        h = self.conv1(F.gelu(self.norm1(x)))
        h = self.conv2(F.gelu(self.norm2(h)))
        residual = self.skip(x) if self.skip is not None else x
        return residual + h


class SpatialSelfAttention(Module):
    """Self-attention over the H*W positions of a feature map, with residual."""

    def __init__(self, channels, num_heads=1):
        super().__init__()
        self.channels = channels
        self.norm = AdaptiveNorm(channels, spatial=True)
        self.attn = MultiheadAttention(channels, num_heads)

    def forward(self, x, need_weights=False):
        n, c, h, w = x.shape
        tokens = F.transpose(F.reshape(self.norm(x), (n, c, h * w)), (0, 2, 1))
        out, weights = self.attn(tokens, tokens, tokens, need_weights=need_weights)
        out = F.reshape(F.transpose(out, (0, 2, 1)), (n, c, h, w))
        if need_weights:
            return x + out, weights
        return x + out


class ResidualBlockWithAttention(Module):
    """Residual block followed by spatial self-attention (always applied)."""

    def __init__(self, channels, num_heads=1):
        super().__init__()
        self.res = ResidualBlock(channels, channels)
        self.attn = SpatialSelfAttention(channels, num_heads)

    def forward(self, x):
        return self.attn(self.res(x))

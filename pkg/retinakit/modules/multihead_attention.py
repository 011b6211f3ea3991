# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

from retinakit.autograd import ShapeError, functional as F

from .linear import Linear
from .module import Module, constant, xavier_uniform


class MultiheadAttention(Module):
    """Multi-headed attention.

    See "Attention Is All You Need" for more details.
    """

    def __init__(self, embed_dim, num_heads, bias=True):
        super().__init__()
        self.embed_dim = embed_dim
        self.num_heads = num_heads
        self.head_dim = embed_dim // num_heads
        if self.head_dim * num_heads != self.embed_dim:
            raise ShapeError('embed_dim must be divisible by num_heads ({} / {})'.format(
                embed_dim, num_heads))

        self.in_proj_weight = xavier_uniform((3 * embed_dim, embed_dim))
        if bias:
            self.in_proj_bias = constant((3 * embed_dim,), 0.)
        else:
            self.register_parameter('in_proj_bias', None)
        self.out_proj = Linear(embed_dim, embed_dim, bias=bias)
        if bias:
            self.out_proj.bias.data[...] = 0.

    def forward(self, query, key, value, need_weights=True):
        """Input shape: Batch x Time x Channel

        Self-attention can be implemented by passing the same tensor as
        query, key and value. Returns the attention output and, when
        *need_weights* is set, the head-averaged attention weights
        (Batch x Time x Source).
        """
        return F.multi_head_attention(
            query, key, value, self.num_heads,
            self.in_proj_weight, self.in_proj_bias,
            self.out_proj.weight, self.out_proj.bias,
            need_weights=need_weights,
        )

    def extra_repr(self):
        return 'embed_dim={}, num_heads={}'.format(self.embed_dim, self.num_heads)

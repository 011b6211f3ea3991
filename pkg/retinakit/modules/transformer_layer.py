# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

from retinakit.autograd import functional as F

from .layer_norm import LayerNorm
from .linear import Linear
from .module import Module, ModuleList
from .multihead_attention import MultiheadAttention


class TransformerEncoderLayer(Module):
    """Encoder layer block.

    By default each sub-layer is preprocessed with layernorm and
    postprocessed with a residual connection (pre-norm). Setting
    *normalize_before* to ``False`` gives the post-norm ordering
    `sublayer -> add residual -> layernorm`.
    """

    def __init__(self, embed_dim, num_heads, ffn_embed_dim, normalize_before=True):
        super().__init__()
        self.embed_dim = embed_dim
        self.self_attn = MultiheadAttention(embed_dim, num_heads)
        self.normalize_before = normalize_before
        self.fc1 = Linear(embed_dim, ffn_embed_dim)
        self.fc2 = Linear(ffn_embed_dim, embed_dim)
        self.layer_norms = ModuleList([LayerNorm(embed_dim) for _ in range(2)])

    def forward(self, x):
        """
        Args:
            x (Tensor): input to the layer of shape `(batch, tokens, embed_dim)`

        Returns:
            encoded output of shape `(batch, tokens, embed_dim)`
        """
        residual = x
        x = self.maybe_layer_norm(0, x, before=True)
        x, _ = self.self_attn(x, x, x, need_weights=False)
        x = residual + x
        x = self.maybe_layer_norm(0, x, after=True)

        residual = x
        x = self.maybe_layer_norm(1, x, before=True)
        x = F.gelu(self.fc1(x))
        x = self.fc2(x)
        x = residual + x
        x = self.maybe_layer_norm(1, x, after=True)
        return x

    def maybe_layer_norm(self, i, x, before=False, after=False):
        assert before ^ after
        if after ^ self.normalize_before:
            return self.layer_norms[i](x)
        else:
            return x

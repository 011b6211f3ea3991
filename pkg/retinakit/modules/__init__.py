# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

from .module import Module, ModuleList, Parameter  # noqa: F401
from .conv2d import Conv2d
from .layer_norm import AdaptiveNorm, LayerNorm
from .learned_positional_embedding import LearnedPositionalEmbedding
from .linear import Linear
from .multihead_attention import MultiheadAttention
from .residual_block import ResidualBlock, ResidualBlockWithAttention, SpatialSelfAttention
from .transformer_layer import TransformerEncoderLayer

__all__ = [
    'AdaptiveNorm',
    'Conv2d',
    'LayerNorm',
    'LearnedPositionalEmbedding',
    'Linear',
    'Module',
    'ModuleList',
    'MultiheadAttention',
    'Parameter',
    'ResidualBlock',
    'ResidualBlockWithAttention',
    'SpatialSelfAttention',
    'TransformerEncoderLayer',
]

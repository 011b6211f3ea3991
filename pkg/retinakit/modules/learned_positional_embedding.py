# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

from retinakit.autograd import ShapeError

from .module import Module, normal


class LearnedPositionalEmbedding(Module):
    """Learns one embedding per token position (class token included) up to
    a fixed number of positions and adds it to the input tokens."""

    def __init__(self, num_positions, embedding_dim, std=0.02):
        super().__init__()
        self.num_positions = num_positions
        self.embedding_dim = embedding_dim
        self.weight = normal((1, num_positions, embedding_dim), std=std)

    def forward(self, x):
        """Input is expected to be of size [bsz x seqlen x dim]."""
        if x.shape[1] != self.num_positions or x.shape[2] != self.embedding_dim:
            raise ShapeError('expected {} tokens of dim {}, got {}'.format(
                self.num_positions, self.embedding_dim, x.shape))
        return x + self.weight

    def max_positions(self):
        """Maximum number of supported positions."""
        return self.num_positions

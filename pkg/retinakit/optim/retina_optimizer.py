# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

import math


class RetinaOptimizer(object):
    """Updates a fixed list of :class:`~retinakit.modules.Parameter` in place."""

    def __init__(self, args, params):
        super().__init__()
        self.args = args
        self.params = list(params)
        self._lr = args.lr

    @staticmethod
    def add_args(parser):
        """Add optimizer-specific arguments to the parser."""
        pass

    def get_lr(self):
        """Return the current learning rate."""
        return self._lr

    def set_lr(self, lr):
        """Set the learning rate."""
        self._lr = lr

    def state_dict(self):
        """Return the optimizer's state dict."""
        raise NotImplementedError

    def load_state_dict(self, state_dict):
        """Load an optimizer state dict."""
        raise NotImplementedError

    def backward(self, loss):
        """Computes the sum of gradients of the given tensor w.r.t. graph leaves."""
        loss.backward()

    def multiply_grads(self, c):
        """Multiplies grads by a constant *c*."""
        for p in self.params:
            if p.grad is not None:
                p.grad = p.grad * c

    def grad_norm(self):
        return math.sqrt(sum(float((p.grad.astype('float64') ** 2).sum())
                             for p in self.params if p.grad is not None))

    def step(self):
        """Performs a single optimization step."""
        raise NotImplementedError

    def zero_grad(self):
        """Clears the gradients of all optimized parameters."""
        for p in self.params:
            p.grad = None

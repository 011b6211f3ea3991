# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

import numpy as np

from retinakit import utils
from retinakit.autograd import Tensor

from . import RetinaOptimizer, register_optimizer


class AdamState(object):
    """First/second moment buffers (one per parameter) and the step counter."""

    def __init__(self, params, betas=(0.9, 0.999), eps=1e-8):
        self.betas = tuple(betas)
        self.eps = eps
        self.step = 0
        self.exp_avg = [np.zeros_like(_array(p)) for p in params]
        self.exp_avg_sq = [np.zeros_like(_array(p)) for p in params]

    def state_dict(self):
        return {
            'step': self.step,
            'betas': list(self.betas),
            'eps': self.eps,
            'exp_avg': [m.copy() for m in self.exp_avg],
            'exp_avg_sq': [v.copy() for v in self.exp_avg_sq],
        }

    def load_state_dict(self, state_dict):
        if len(state_dict['exp_avg']) != len(self.exp_avg):
            raise ValueError('optimizer state has {} moment buffers, expected {}'.format(
                len(state_dict['exp_avg']), len(self.exp_avg)))
        for i, (m, v) in enumerate(zip(state_dict['exp_avg'], state_dict['exp_avg_sq'])):
            if m.shape != self.exp_avg[i].shape or v.shape != self.exp_avg_sq[i].shape:
                raise ValueError('moment buffer {} has shape {}, expected {}'.format(
                    i, m.shape, self.exp_avg[i].shape))
            self.exp_avg[i] = np.array(m, dtype=self.exp_avg[i].dtype)
            self.exp_avg_sq[i] = np.array(v, dtype=self.exp_avg_sq[i].dtype)
        self.step = int(state_dict['step'])
        self.betas = tuple(state_dict.get('betas', self.betas))
        self.eps = state_dict.get('eps', self.eps)


def _array(p):
    return p.data if isinstance(p, Tensor) else p


def adam_step(params, grads, state, lr):
    """One bias-corrected Adam update, in place.

    *params* are arrays (or tensors, updated through ``.data``) and *grads*
    the matching gradient arrays. Returns the updated parameter arrays.
    """
    if len(params) != len(grads):
        raise ValueError('got {} gradients for {} parameters'.format(len(grads), len(params)))
    for i, g in enumerate(grads):
        if g is None:
            raise ValueError('missing gradient for parameter {}'.format(i))

    state.step += 1
    beta1, beta2 = state.betas
    bias_correction1 = 1 - beta1 ** state.step
    bias_correction2 = 1 - beta2 ** state.step

    out = []
    for p, g, exp_avg, exp_avg_sq in zip(params, grads, state.exp_avg, state.exp_avg_sq):
        data = _array(p)
        exp_avg *= beta1
        exp_avg += (1 - beta1) * g
        exp_avg_sq *= beta2
        exp_avg_sq += (1 - beta2) * g * g
        denom = np.sqrt(exp_avg_sq / bias_correction2) + state.eps
        data -= lr * (exp_avg / bias_correction1) / denom
        out.append(data)
    return out


@register_optimizer('adam')
class RetinaAdam(RetinaOptimizer):
    """Adam without weight decay."""

    def __init__(self, args, params):
        super().__init__(args, params)
        betas = utils.float_tuple(getattr(args, 'adam_betas', '(0.9, 0.999)'))
        if len(betas) != 2:
            raise ValueError('--adam-betas takes two values, got {!r}'.format(args.adam_betas))
        self.state = AdamState(self.params, betas=betas, eps=getattr(args, 'adam_eps', 1e-8))

    @staticmethod
    def add_args(parser):
        """Add optimizer-specific arguments to the parser."""
        # fmt: off
        parser.add_argument('--adam-betas', default='(0.9, 0.999)', metavar='B',
                            help='betas for Adam optimizer')
        parser.add_argument('--adam-eps', type=float, default=1e-8, metavar='D',
                            help='epsilon for Adam optimizer')
        # fmt: on

    def step(self):
        for i, p in enumerate(self.params):
            if p.grad is None:
                raise ValueError('missing gradient for parameter {} (shape {})'.format(i, p.shape))
        adam_step(self.params, [p.grad for p in self.params], self.state, self._lr)

    def state_dict(self):
        state = self.state.state_dict()
        state['lr'] = self._lr
        return state

    def load_state_dict(self, state_dict):
        self.state.load_state_dict(state_dict)

    @property
    def num_steps(self):
        return self.state.step

    def __repr__(self):
        return 'RetinaAdam(lr={}, betas={}, eps={})'.format(self._lr, self.state.betas, self.state.eps)

# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

import math

from . import RetinaLRScheduler, register_lr_scheduler


class ScheduleConfig(object):

    def __init__(self, base_lr, total_epochs, warmup_epochs):
        if not base_lr > 0:
            raise ValueError('base_lr must be positive, got {}'.format(base_lr))
        if not 0 <= warmup_epochs < total_epochs:
            raise ValueError('need 0 <= warmup_epochs < total_epochs, got {} and {}'.format(
                warmup_epochs, total_epochs))
        self.base_lr = base_lr
        self.total_epochs = total_epochs
        self.warmup_epochs = warmup_epochs

    def __repr__(self):
        return 'ScheduleConfig(base_lr={}, total_epochs={}, warmup_epochs={})'.format(
            self.base_lr, self.total_epochs, self.warmup_epochs)


def lr_at(epoch, cfg):
    """Learning rate at a (possibly fractional) *epoch*.

    Linear warm-up from 0 to ``base_lr`` over the first ``warmup_epochs``,
    then half a cosine period down to 0 at ``total_epochs``.
    """
    if not 0 <= epoch <= cfg.total_epochs:
        raise ValueError('epoch {} outside [0, {}]'.format(epoch, cfg.total_epochs))
    if epoch < cfg.warmup_epochs:
        return cfg.base_lr * epoch / cfg.warmup_epochs
    progress = (epoch - cfg.warmup_epochs) / (cfg.total_epochs - cfg.warmup_epochs)
    return cfg.base_lr * 0.5 * (1 + math.cos(math.pi * progress))


@register_lr_scheduler('cosine')
class CosineSchedule(RetinaLRScheduler):
    """Epoch-level cosine schedule with linear warm-up.

    Training epoch ``e`` (1-based) runs at ``lr_at(e - 1)``: the rate is set
    to ``lr_at(0)`` on construction and to ``lr_at(e)`` once epoch ``e`` ends.
    """

    def __init__(self, args, optimizer):
        super().__init__(args, optimizer)
        self.cfg = ScheduleConfig(args.lr, args.max_epoch, args.warmup_epochs)
        self.set_lr(lr_at(0, self.cfg))

    @staticmethod
    def add_args(parser):
        """Add arguments to the parser for this LR scheduler."""
        # fmt: off
        parser.add_argument('--warmup-epochs', default=5, type=int, metavar='N',
                            help='warm up the learning rate linearly from 0 for the first N epochs')
        # fmt: on

    def step(self, epoch, val_loss=None):
        """Update the learning rate at the end of the given epoch."""
        super().step(epoch, val_loss)
        self.set_lr(lr_at(min(epoch, self.cfg.total_epochs), self.cfg))
        return self.get_lr()

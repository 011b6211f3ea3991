# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

from . import RetinaLRScheduler, register_lr_scheduler


@register_lr_scheduler('fixed')
class FixedSchedule(RetinaLRScheduler):
    """Keeps the learning rate at ``--lr`` for every epoch."""

    def __init__(self, args, optimizer):
        super().__init__(args, optimizer)
        self.set_lr(args.lr)

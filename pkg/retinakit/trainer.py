# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

"""
Train a network in a single process.
"""

from collections import OrderedDict

from retinakit import checkpoint_utils, optim, utils
from retinakit.data import numpy_seed
from retinakit.meters import AverageMeter, StopwatchMeter, TimeMeter
from retinakit.optim import lr_scheduler


class Trainer(object):
    """Main class for training.

    Every entry of ``model.optimizer_groups()`` gets its own optimizer (one
    for classifiers, generator and discriminator for GANomaly); all of them
    follow the same learning-rate schedule. The task's ``train_step`` runs
    the forward, backward and update of one batch under the NumPy seed
    ``args.seed + num_updates``, so resuming from a checkpoint replays the
    same random draws.
    """

    def __init__(self, args, task, model, criterion):
        self.args = args
        self.task = task
        self.criterion = criterion
        self._model = model

        self._lr_scheduler = None
        self._num_updates = 0
        self._optim_history = None
        self._optimizers = None

        self.init_meters(args)

    def init_meters(self, args):
        self.meters = OrderedDict()
        self.meters['train_loss'] = AverageMeter()
        self.meters['valid_loss'] = AverageMeter()
        self.meters['ips'] = TimeMeter()       # images per second
        self.meters['ups'] = TimeMeter()       # updates per second
        self.meters['bsz'] = AverageMeter()    # images per batch
        self.meters['gnorm'] = AverageMeter()  # gradient norm of the first optimizer
        self.meters['wall'] = TimeMeter()      # wall time in seconds
        self.meters['train_wall'] = StopwatchMeter()  # train wall time in seconds

    @property
    def model(self):
        return self._model

    @property
    def optimizers(self):
        if self._optimizers is None:
            self._build_optimizer()
        return self._optimizers

    @property
    def optimizer(self):
        return self.optimizers[0]

    @property
    def lr_scheduler(self):
        if self._lr_scheduler is None:
            self._build_optimizer()  # this will initialize self._lr_scheduler
        return self._lr_scheduler

    def _build_optimizer(self):
        self._optimizers = [optim.build_optimizer(self.args, group) for group in self.model.optimizer_groups()]
        # the scheduler sets the initial learning rate
        self._lr_scheduler = lr_scheduler.build_lr_scheduler(self.args, self._optimizers)

    def save_checkpoint(self, filename, extra_state):
        """Save all training state in a checkpoint file."""
        checkpoint_utils.save_state(
            filename, self.args, self.get_model(), self.criterion, self.optimizers,
            self.lr_scheduler, self._num_updates, self._optim_history, extra_state,
        )

    def load_checkpoint(self, filename, reset_optimizer=False, reset_lr_scheduler=False):
        """Load all training state from a checkpoint file."""
        state = checkpoint_utils.load_checkpoint_to_cpu(filename)
        self.get_model().load_state_dict(state['model'], strict=True)
        self._optim_history = state['optimizer_history']
        last_optim_state = state['last_optimizer_state']
        last_optim = self._optim_history[-1]

        if last_optim_state is not None and not reset_optimizer:
            # rebuild optimizer after loading model, since params may have changed
            self._build_optimizer()

            # only reload optimizer and lr_scheduler if they match
            assert last_optim['criterion_name'] == self.criterion.__class__.__name__, \
                'criterion does not match; please reset the optimizer (--reset-optimizer)'
            assert last_optim['optimizer_name'] == self.optimizer.__class__.__name__, \
                'optimizer does not match; please reset the optimizer (--reset-optimizer)'
            assert len(last_optim_state) == len(self.optimizers), \
                'checkpoint has {} optimizer states for {} optimizers'.format(
                    len(last_optim_state), len(self.optimizers))

            if not reset_lr_scheduler:
                self.lr_scheduler.load_state_dict(last_optim['lr_scheduler_state'])
            for opt, opt_state in zip(self.optimizers, last_optim_state):
                opt.load_state_dict(opt_state)

        self.set_num_updates(last_optim['num_updates'])

        # reset TimeMeters, since their start times don't make sense anymore
        for meter in self.meters.values():
            if isinstance(meter, TimeMeter):
                meter.reset()

        return state['extra_state']

    def train_step(self, sample):
        """Do forward, backward and parameter update for one batch.

        Returns the logging output of the task's ``train_step``.
        """
        self.meters['train_wall'].start()
        with numpy_seed(self.args.seed + self.get_num_updates()):
            loss, sample_size, logging_output = self.task.train_step(
                sample, self.model, self.criterion, self.optimizers,
            )
        self.set_num_updates(self._num_updates + 1)

        nsamples = logging_output.get('nsamples', sample_size)
        self.meters['ips'].update(nsamples)
        self.meters['ups'].update(1.)
        self.meters['bsz'].update(nsamples)
        self.meters['gnorm'].update(self.optimizer.grad_norm())
        self.meters['train_loss'].update(utils.item(loss), sample_size)
        self.meters['train_wall'].stop()
        return logging_output

    def valid_step(self, sample):
        """Do forward pass in evaluation mode."""
        _loss, sample_size, logging_output = self.task.valid_step(sample, self.model, self.criterion)
        self.meters['valid_loss'].update(logging_output.get('loss', 0.) / max(sample_size, 1), sample_size)
        return logging_output

    def zero_grad(self):
        for opt in self.optimizers:
            opt.zero_grad()

    def lr_step(self, epoch, val_loss=None):
        """Adjust the learning rate at the end of *epoch*."""
        return self.lr_scheduler.step(epoch, val_loss)

    def get_lr(self):
        """Get the current learning rate."""
        return self.optimizer.get_lr()

    def get_model(self):
        """Get the model instance."""
        return self._model

    def get_meter(self, name):
        """Get a specific meter by name."""
        if name not in self.meters:
            return None
        return self.meters[name]

    def get_num_updates(self):
        """Get the number of parameters updates."""
        return self._num_updates

    def set_num_updates(self, num_updates):
        self._num_updates = num_updates
        self._model.num_updates = num_updates

    def checksum(self):
        """SHA-256 of the current model parameters."""
        return checkpoint_utils.model_checksum(self.get_model())

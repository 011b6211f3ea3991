#!/usr/bin/env python3 -u
# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.
"""
Train a new model for one stage (vit, vit+mask or ganomaly).
"""

import collections
import sys

from retinakit import checkpoint_utils, options, progress_bar, tasks
from retinakit.data import numpy_seed
from retinakit.meters import StopwatchMeter
from retinakit.run_log import RunLog
from retinakit.trainer import Trainer


def main(args):
    print(args, flush=True)
    # best validation loss of an earlier run in this process
    if hasattr(checkpoint_utils.save_checkpoint, 'best'):
        del checkpoint_utils.save_checkpoint.best

    # Setup task, e.g., classification or anomaly detection
    task = tasks.setup_task(args)

    # Load dataset splits
    for split in ('train', 'valid'):
        task.load_dataset(split)

    # Build model and criterion
    with numpy_seed(args.seed):
        model = task.build_model(args)
    criterion = task.build_criterion(args)
    print(model, flush=True)
    print('| model {}, criterion {}'.format(args.arch, criterion.__class__.__name__), flush=True)
    print('| num. model params: {} (num. trained: {})'.format(
        sum(p.numel() for p in model.parameters()),
        sum(p.numel() for p in model.parameters() if p.requires_grad),
    ), flush=True)

    # Build trainer
    trainer = Trainer(args, task, model, criterion)
    print('| batch size = {}'.format(args.batch_size), flush=True)

    # Initialize dataloader
    epoch_itr = task.get_batch_iterator(task.dataset('train'), args.batch_size, seed=args.seed)

    # Load the latest checkpoint if one is available
    checkpoint_utils.load_checkpoint(args, trainer, epoch_itr)
    run_log = RunLog(args.save_dir, start_epoch=epoch_itr.epoch)

    max_epoch = args.max_epoch
    train_meter = StopwatchMeter()
    train_meter.start()
    while epoch_itr.epoch < max_epoch:
        # train for one epoch
        train_stats = train(args, trainer, task, epoch_itr)
        valid_stats = validate(args, trainer, task, epoch_itr)

        lr = trainer.lr_step(epoch_itr.epoch, valid_stats['loss'])
        run_log.log_epoch(epoch_itr.epoch, lr, trainer.get_num_updates(), train_stats, valid_stats)

        # save checkpoint
        if epoch_itr.epoch % args.save_interval == 0 or epoch_itr.epoch == max_epoch:
            checkpoint_utils.save_checkpoint(args, trainer, epoch_itr, valid_stats['loss'])
    train_meter.stop()
    print('| done training in {:.1f} seconds'.format(train_meter.sum), flush=True)
    print('| final parameter checksum {}'.format(trainer.checksum()), flush=True)
    return trainer


def train(args, trainer, task, epoch_itr):
    """Train the model for one epoch and return the aggregated logging outputs."""
    itr = epoch_itr.next_epoch_itr(shuffle=True)
    progress = progress_bar.build_progress_bar(args, itr, epoch_itr.epoch, no_progress_bar='simple')

    logging_outputs = []
    for i, sample in enumerate(progress):
        log_output = trainer.train_step(sample)
        logging_outputs.append(log_output)
        progress.log(get_training_stats(trainer))

        # ignore the first mini-batch in images-per-second calculation
        if i == 0:
            trainer.get_meter('ips').reset()

    agg = task.aggregate_logging_outputs(logging_outputs, trainer.criterion)

    # log end-of-epoch stats
    stats = get_training_stats(trainer)
    stats.update(progress_bar.flatten_stats(agg))
    progress.print(stats, tag='train')

    # reset training meters
    for k in ['train_loss', 'ips', 'ups', 'bsz', 'gnorm']:
        meter = trainer.get_meter(k)
        if meter is not None:
            meter.reset()
    return agg


def get_training_stats(trainer):
    stats = collections.OrderedDict()
    stats['loss'] = trainer.get_meter('train_loss')
    stats['ips'] = trainer.get_meter('ips')
    stats['ups'] = trainer.get_meter('ups')
    stats['bsz'] = trainer.get_meter('bsz')
    stats['num_updates'] = trainer.get_num_updates()
    stats['lr'] = trainer.get_lr()
    stats['gnorm'] = trainer.get_meter('gnorm')
    stats['wall'] = round(trainer.get_meter('wall').elapsed_time)
    stats['train_wall'] = trainer.get_meter('train_wall')
    return stats


def validate(args, trainer, task, epoch_itr):
    """Evaluate the model on the validation split and return the aggregated
    logging outputs."""
    itr = task.get_batch_iterator(
        task.dataset('valid'), args.batch_size, seed=args.seed,
    ).next_epoch_itr(shuffle=False)
    progress = progress_bar.build_progress_bar(
        args, itr, epoch_itr.epoch,
        prefix='valid on \'valid\' subset',
        no_progress_bar='simple'
    )

    trainer.get_meter('valid_loss').reset()
    logging_outputs = [trainer.valid_step(sample) for sample in progress]
    agg = task.aggregate_logging_outputs(logging_outputs, trainer.criterion)

    # log validation stats
    stats = get_valid_stats(trainer, agg)
    progress.print(stats, tag='valid')
    return agg


def get_valid_stats(trainer, agg):
    stats = collections.OrderedDict()
    stats.update(progress_bar.flatten_stats(agg))
    stats['num_updates'] = trainer.get_num_updates()
    if hasattr(checkpoint_utils.save_checkpoint, 'best'):
        stats['best_loss'] = min(checkpoint_utils.save_checkpoint.best, agg['loss'])
    return stats


def cli_main(argv=None, prog=None):
    parser = options.get_training_parser(prog=prog)
    args = options.parse_args_and_arch(parser, argv)
    main(args)


if __name__ == '__main__':
    sys.exit(cli_main())

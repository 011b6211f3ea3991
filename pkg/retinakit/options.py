# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

"""
Command-line parsers.

Every parser accepts ``--config FILE``: a line-oriented ``key=value`` file
(``#`` starts a comment, blank lines are ignored) whose keys are flag names,
with or without leading dashes, spelled with ``-`` or ``_``. File values
become parser defaults, so flags given on the command line override them.
"""

import argparse
from collections import OrderedDict
import sys

from retinakit.criterions import CRITERION_REGISTRY
from retinakit.data.data_utils import DataError
from retinakit.models import ARCH_MODEL_REGISTRY, ARCH_CONFIG_REGISTRY
from retinakit.optim import OPTIMIZER_REGISTRY
from retinakit.optim.lr_scheduler import LR_SCHEDULER_REGISTRY
from retinakit.progress_bar import LOG_FORMATS
from retinakit.tasks import TASK_REGISTRY


# training stage -> defaults of the components it is trained with
STAGE_DEFAULTS = OrderedDict([
    ('vit', OrderedDict([
        ('task', 'classification'), ('arch', 'vit_toy'), ('criterion', 'cross_entropy'), ('max_epoch', 30),
    ])),
    ('vit+mask', OrderedDict([
        ('task', 'classification'), ('arch', 'masked_vit_toy'), ('criterion', 'constrained_attention'),
        ('max_epoch', 30),
    ])),
    ('ganomaly', OrderedDict([
        ('task', 'anomaly_detection'), ('arch', 'ganomaly_desk'), ('criterion', 'ganomaly_loss'),
        ('max_epoch', 100),
    ])),
])

TRUE_VALUES = ('1', 'true', 'yes', 'on')
FALSE_VALUES = ('0', 'false', 'no', 'off')


class RetinaArgumentParser(argparse.ArgumentParser):
    """:class:`argparse.ArgumentParser` exiting with status 1 on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, '{}: error: {}\n'.format(self.prog, message))


def read_config(path):
    """Parse a ``key=value`` config file into an ordered dict keyed by
    argparse destination names."""
    config = OrderedDict()
    try:
        with open(path, 'r', encoding='utf-8') as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise DataError('cannot read config {}: {}'.format(path, e))
    for lineno, line in enumerate(lines, start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise DataError('{} line {}: expected key=value, got {!r}'.format(path, lineno, line))
        key, value = line.split('=', 1)
        config[key.strip().lstrip('-').replace('-', '_')] = value.strip()
    return config


def _config_value(action, value):
    if action.nargs == 0:
        # store_true / store_false
        v = value.lower()
        if v not in TRUE_VALUES + FALSE_VALUES:
            raise ValueError('expected a boolean, got {!r}'.format(value))
        flag = v in TRUE_VALUES
        return flag if action.const is True else not flag
    if action.choices is not None and action.type is None and value not in action.choices:
        raise ValueError('invalid choice {!r} (choose from {})'.format(value, ', '.join(map(str, action.choices))))
    return value


def apply_config(parser, config, strict=False):
    """Install the *config* values known to *parser* as its defaults.

    Returns the keys *parser* does not know; with *strict* they are a usage
    error.
    """
    actions = {a.dest: a for a in parser._actions}
    unknown = []
    for key, value in config.items():
        if key == 'config':
            continue
        if key not in actions:
            unknown.append(key)
            continue
        try:
            actions[key].default = _config_value(actions[key], value)
        except ValueError as e:
            parser.error('config key {}: {}'.format(key, e))
    if strict and unknown:
        parser.error('unknown config key(s): {}'.format(', '.join(unknown)))
    return unknown


def _load_config(parser, input_args):
    args, _ = parser.parse_known_args(input_args)
    if getattr(args, 'config', None):
        return read_config(args.config)
    return OrderedDict()


def parse_args(parser, input_args=None):
    """Parse *input_args* with ``--config`` defaults."""
    config = _load_config(parser, input_args)
    apply_config(parser, config, strict=True)
    return parser.parse_args(input_args)


def parse_args_and_arch(parser, input_args=None, parse_known=False):
    # The parser doesn't know about model/criterion/optimizer-specific args, so
    # we parse twice. First we parse the model/criterion/optimizer, then we
    # parse a second time after adding the *-specific arguments.
    # If input_args is given, we will parse those args instead of sys.argv.
    config = _load_config(parser, input_args)
    apply_config(parser, config)

    # stage defaults fill in the components the config does not name
    args, _ = parser.parse_known_args(input_args)
    if getattr(args, 'stage', None) is not None:
        parser.set_defaults(**OrderedDict(
            (k, v) for k, v in STAGE_DEFAULTS[args.stage].items() if k not in config
        ))
    args, _ = parser.parse_known_args(input_args)

    # Add model-specific args to parser.
    if hasattr(args, 'arch'):
        model_specific_group = parser.add_argument_group(
            'Model-specific configuration',
            # Only include attributes which are explicitly given as command-line
            # arguments or which have default values.
            argument_default=argparse.SUPPRESS,
        )
        ARCH_MODEL_REGISTRY[args.arch].add_args(model_specific_group)

    # Add *-specific args to parser.
    if hasattr(args, 'criterion'):
        CRITERION_REGISTRY[args.criterion].add_args(parser)
    if hasattr(args, 'optimizer'):
        OPTIMIZER_REGISTRY[args.optimizer].add_args(parser)
    if hasattr(args, 'lr_scheduler'):
        LR_SCHEDULER_REGISTRY[args.lr_scheduler].add_args(parser)
    if hasattr(args, 'task'):
        TASK_REGISTRY[args.task].add_args(parser)

    apply_config(parser, config, strict=True)

    # Parse a second time.
    if parse_known:
        args, extra = parser.parse_known_args(input_args)
    else:
        args = parser.parse_args(input_args)
        extra = None

    if hasattr(args, 'seed') and args.seed is None and getattr(args, 'seed_required', False):
        parser.error('the following arguments are required: --seed')
    if hasattr(args, 'seed_required'):
        del args.seed_required

    # Apply architecture configuration.
    if hasattr(args, 'arch'):
        ARCH_CONFIG_REGISTRY[args.arch](args)

    if parse_known:
        return args, extra
    else:
        return args


def get_parser(desc, default_task=None, prog=None):
    parser = RetinaArgumentParser(prog=prog, description=desc)
    # fmt: off
    parser.add_argument('--no-progress-bar', action='store_true', help='disable progress bar')
    parser.add_argument('--log-interval', type=int, default=10, metavar='N',
                        help='log progress every N batches (when progress bar is disabled)')
    parser.add_argument('--log-format', default=None, help='log format to use',
                        choices=LOG_FORMATS)
    parser.add_argument('--seed', default=None, type=int, metavar='N',
                        help='pseudo random number generator seed')
    parser.add_argument('--config', metavar='FILE',
                        help='key=value file providing defaults for any flag')
    if default_task is not None:
        # Task definitions can be found under retinakit/tasks/
        parser.add_argument('--task', metavar='TASK', default=default_task,
                            choices=TASK_REGISTRY.keys(),
                            help='task')
    # fmt: on
    return parser


def get_training_parser(default_stage='vit', prog=None):
    parser = get_parser('Trainer', default_task='classification', prog=prog)
    parser.add_argument('--stage', default=default_stage,
                        choices=STAGE_DEFAULTS.keys(),
                        help='training stage; selects the default task, architecture, criterion '
                             'and number of epochs')
    parser.set_defaults(seed_required=True)
    add_dataset_args(parser)
    add_model_args(parser)
    add_optimization_args(parser)
    add_checkpoint_args(parser)
    return parser


def add_dataset_args(parser):
    group = parser.add_argument_group('Dataset and data loading')
    # fmt: off
    group.add_argument('--batch-size', default=16, type=int, metavar='N',
                       help='number of images in a batch')
    # fmt: on
    return group


def add_model_args(parser):
    group = parser.add_argument_group('Model configuration')

    # Model definitions can be found under retinakit/models/
    #
    # The model architecture can be specified in several ways.
    # In increasing order of priority:
    # 1) stage default (--stage)
    # 2) --config file
    # 3) --arch argument
    # fmt: off
    group.add_argument('--arch', '-a', default='vit_toy', metavar='ARCH',
                       choices=ARCH_MODEL_REGISTRY.keys(),
                       help='Model Architecture')

    # Criterion definitions can be found under retinakit/criterions/
    group.add_argument('--criterion', default='cross_entropy', metavar='CRIT',
                       choices=CRITERION_REGISTRY.keys(),
                       help='Training Criterion')
    # fmt: on
    return group


def add_optimization_args(parser):
    group = parser.add_argument_group('Optimization')
    # fmt: off
    group.add_argument('--max-epoch', '--me', default=30, type=int, metavar='N',
                       help='force stop training at specified epoch')

    # Optimizer definitions can be found under retinakit/optim/
    group.add_argument('--optimizer', default='adam', metavar='OPT',
                       choices=OPTIMIZER_REGISTRY.keys(),
                       help='Optimizer')
    group.add_argument('--lr', '--learning-rate', default=1e-5, type=float, metavar='LR',
                       help='base learning rate')

    # Learning rate schedulers can be found under retinakit/optim/lr_scheduler/
    group.add_argument('--lr-scheduler', default='cosine',
                       choices=LR_SCHEDULER_REGISTRY.keys(),
                       help='Learning Rate Scheduler')
    # fmt: on
    return group


def add_checkpoint_args(parser):
    group = parser.add_argument_group('Checkpointing')
    # fmt: off
    group.add_argument('--save-dir', metavar='DIR', default='checkpoints',
                       help='path to save checkpoints and run logs')
    group.add_argument('--restore-file', default='checkpoint_last.pt',
                       help='filename in save-dir from which to load checkpoint')
    group.add_argument('--reset-optimizer', action='store_true',
                       help='if set, does not load optimizer state from the checkpoint')
    group.add_argument('--reset-lr-scheduler', action='store_true',
                       help='if set, does not load lr scheduler state from the checkpoint')
    group.add_argument('--save-interval', type=int, default=1, metavar='N',
                       help='save a checkpoint every N epochs')
    group.add_argument('--keep-last-epochs', type=int, default=-1, metavar='N',
                       help='keep last N epoch checkpoints')
    group.add_argument('--no-save', action='store_true',
                       help='don\'t save models or checkpoints')
    group.add_argument('--no-epoch-checkpoints', action='store_true',
                       help='only store last and best checkpoints')
    # fmt: on
    return group


def add_common_eval_args(group):
    # fmt: off
    group.add_argument('--checkpoint', '--path', dest='path', metavar='FILE', required=True,
                       help='path to the model checkpoint')
    group.add_argument('--batch-size', default=16, type=int, metavar='N',
                       help='number of images in a batch')
    group.add_argument('--results-path', metavar='FILE', default=None,
                       help='write the results to FILE instead of stdout')
    # fmt: on

#!/usr/bin/env python3 -u
# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.
"""
Entry point of the ``retinakit`` command: dispatches to one module of
``retinakit_cli`` per subcommand.

Exit status is 0 on success, 1 on usage errors and 2 on data errors
(unreadable or malformed inputs).
"""

from collections import OrderedDict
import importlib
import sys

from retinakit.data import DataError


COMMANDS = OrderedDict([
    ('train', ('retinakit_cli.train', 'train a vit, vit+mask or ganomaly model')),
    ('eval', ('retinakit_cli.evaluate', 'evaluate a classifier checkpoint on one split')),
    ('anomaly-score', ('retinakit_cli.anomaly_score', 'score images with a ganomaly checkpoint')),
    ('calibrate', ('retinakit_cli.calibrate', 'calibrate anomaly scores into posteriors')),
    ('explain', ('retinakit_cli.explain', 'saliency maps of one image')),
    ('augment-preview', ('retinakit_cli.augment_preview', 'one image under every augmentation setup')),
    ('gen-shapes', ('retinakit_cli.gen_shapes', 'write the synthetic shapes corpus')),
    ('split', ('retinakit_cli.split', 'stratified train/valid/test split of a manifest')),
    ('compare', ('retinakit_cli.compare', 'paired t-test of two k-fold metric files')),
    ('cv', ('retinakit_cli.cv', 'k-fold cross-validation of a classifier')),
])
ALIASES = {'evaluate': 'eval'}


def usage():
    lines = ['usage: retinakit <command> [options]', '', 'commands:']
    for name, (_, help) in COMMANDS.items():
        lines.append('  {:18s}{}'.format(name, help))
    lines.append('')
    lines.append('run `retinakit <command> --help` for the options of a command')
    return '\n'.join(lines) + '\n'


def cli_main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        sys.stderr.write(usage())
        return 1
    if argv[0] in ('-h', '--help'):
        sys.stdout.write(usage())
        return 0
    command = ALIASES.get(argv[0], argv[0])
    if command not in COMMANDS:
        sys.stderr.write(usage())
        sys.stderr.write('retinakit: error: unknown command {!r}\n'.format(argv[0]))
        return 1

    module = importlib.import_module(COMMANDS[command][0])
    try:
        module.cli_main(argv[1:], prog='retinakit ' + command)
    except SystemExit as e:
        if e.code is None:
            return 0
        return e.code if isinstance(e.code, int) else 1
    except (DataError, OSError) as e:
        print('| ERROR: {}'.format(e), file=sys.stderr, flush=True)
        return 2
    except ValueError as e:
        print('retinakit {}: error: {}'.format(command, e), file=sys.stderr, flush=True)
        return 1
    return 0


if __name__ == '__main__':
    sys.exit(cli_main())

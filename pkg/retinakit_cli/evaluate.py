#!/usr/bin/env python3 -u
# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.
"""
Evaluate a trained classifier (vit or vit+mask) on one split and write the
metric report with its confusion matrix.
"""

import sys

import numpy as np
from scipy import special

from retinakit import checkpoint_utils, options, utils
from retinakit.autograd import no_grad
from retinakit.data import EpochBatchIterator
from retinakit.metrics import EvalReport
from retinakit.tasks.retina_task import SPLITS


def predict(model, dataset, batch_size=16):
    """Class probabilities of every image of *dataset*, in dataset order.

    Returns sample ids, probabilities (N x C) and dataset tags.
    """
    itr = EpochBatchIterator(dataset, batch_size).next_epoch_itr(shuffle=False)
    ids, probs, tags = [], [], []
    model.eval()
    with no_grad():
        for sample in itr:
            net_output = model(**sample['net_input'])
            logits = net_output[0] if isinstance(net_output, tuple) else net_output
            probs.append(special.softmax(utils.as_array(logits).astype(np.float64), axis=-1))
            ids.append(sample['id'])
            tags.extend(sample['tags'])
    return np.concatenate(ids), np.concatenate(probs), tags


def evaluate(path, split='test', data=None, batch_size=16, positive_class=None):
    """Evaluate the checkpoint *path* on *split* of its task's manifests.

    The split is rebuilt from the checkpoint's own arguments (same data and
    split seed) unless *data* names another manifest or split directory.
    """
    overrides = {'data': data} if data else None
    model, task, state = checkpoint_utils.load_model_for_inference(path, arg_overrides=overrides)
    if state['stage'] not in ('vit', 'vit+mask'):
        raise ValueError('{} holds a {} model; evaluate needs a classifier (use anomaly-score)'.format(
            path, state['stage']))
    dataset = task.load_dataset(split)
    manifest = task.manifest(split)
    ids, probs, tags = predict(model, dataset, batch_size)

    # labels the model never saw get their own rows (and empty columns)
    classes = list(task.classes)
    for label in manifest.classes:
        if label not in classes:
            classes.append(label)
    targets = np.array([classes.index(manifest[i].label) for i in ids], dtype=np.int64)
    if positive_class is not None and positive_class not in task.classes:
        raise ValueError('positive class {!r} is not a model class'.format(positive_class))
    return EvalReport.from_predictions(
        targets, probs.argmax(axis=1), classes, tags=tags, probs=probs,
        positive_class=positive_class,
    )


def main(args):
    report = evaluate(args.path, args.split, args.data, args.batch_size, args.positive_class)
    print('| {} on {}: {}'.format(args.path, args.split, report), flush=True)
    text = report.to_string(fractions=args.fractions)
    if args.results_path is not None:
        with open(args.results_path, 'w', encoding='utf-8') as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return report


def get_parser(prog=None):
    parser = options.get_parser('Evaluation', prog=prog)
    group = parser.add_argument_group('Evaluation')
    options.add_common_eval_args(group)
    # fmt: off
    group.add_argument('--split', default='test', choices=SPLITS,
                       help='split to evaluate')
    group.add_argument('--data', metavar='PATH',
                       help='manifest or split directory (default: the one the model was trained on)')
    group.add_argument('--positive-class', metavar='CLASS',
                       help='also report the one-vs-rest AUC of this class')
    group.add_argument('--fractions', action='store_true',
                       help='also print the fraction of predictions per true class')
    # fmt: on
    return parser


def cli_main(argv=None, prog=None):
    parser = get_parser(prog)
    args = options.parse_args(parser, argv)
    main(args)


if __name__ == '__main__':
    sys.exit(cli_main())

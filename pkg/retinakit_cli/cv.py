#!/usr/bin/env python3 -u
# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.
"""
Stratified k-fold cross-validation: train one model per fold and write the
per-fold test metric (accuracy for classifiers, AUC for GANomaly), one value
per line, in the format ``compare`` reads.
"""

import copy
import os
import sys

from retinakit import checkpoint_utils, metrics, options
from retinakit.data import HEALTHY_LABEL, Manifest, filter_quality, stratified_kfold

from retinakit_cli import train as train_cli
from retinakit_cli.anomaly_score import score_split
from retinakit_cli.evaluate import evaluate


def write_fold(out_dir, train, test):
    """Fold directory in the split-directory layout; the held-out fold is
    both the validation and the test split."""
    os.makedirs(out_dir, exist_ok=True)
    for name, part in (('train', train), ('valid', test), ('test', test)):
        part.relocated(out_dir).save(os.path.join(out_dir, name + '.tsv'))
    return out_dir


def fold_metric(args, checkpoint):
    if args.stage == 'ganomaly':
        model, task, _ = checkpoint_utils.load_model_for_inference(checkpoint)
        records = score_split(model, task, 'test', args.batch_size)
        return metrics.auc([r.score for r in records], [r.label != HEALTHY_LABEL for r in records])
    return evaluate(checkpoint, split='test', batch_size=args.batch_size).accuracy


def main(args):
    manifest = Manifest.load(args.data)
    if not args.no_quality_filter:
        manifest = filter_quality(manifest)
    folds = stratified_kfold(manifest, args.folds, seed=args.seed, stratify_by=args.stratify_by)

    values = []
    for i, (train, test) in enumerate(folds):
        fold_dir = write_fold(os.path.join(args.save_dir, 'fold{}'.format(i)), train, test)
        print('| fold {} of {}: train {}, test {}'.format(i + 1, args.folds, len(train), len(test)), flush=True)
        fold_args = copy.deepcopy(args)
        fold_args.data = fold_dir
        fold_args.save_dir = fold_dir
        train_cli.main(fold_args)
        value = fold_metric(args, os.path.join(fold_dir, 'checkpoint_last.pt'))
        print('| fold {} {} {:.6f}'.format(i + 1, args.cv_metric, value), flush=True)
        values.append(value)

    metric_file = args.metric_file or os.path.join(args.save_dir, 'cv_{}.txt'.format(args.cv_metric))
    with open(metric_file, 'w', encoding='utf-8') as f:
        f.write('# {} per fold\n'.format(args.cv_metric))
        for v in values:
            f.write('{!r}\n'.format(float(v)))
    print('| {}-fold {}: mean {:.6f} -> {}'.format(
        args.folds, args.cv_metric, sum(values) / len(values), metric_file), flush=True)
    return values


def get_parser(prog=None):
    parser = options.get_training_parser(prog=prog)
    group = parser.add_argument_group('Cross-validation')
    # fmt: off
    group.add_argument('--folds', default=10, type=int, metavar='K',
                       help='number of folds')
    group.add_argument('--metric-file', metavar='FILE',
                       help='per-fold metric values (default: <save-dir>/cv_<metric>.txt)')
    # fmt: on
    return parser


def cli_main(argv=None, prog=None):
    parser = get_parser(prog)
    args = options.parse_args_and_arch(parser, argv)
    if args.folds < 2:
        parser.error('--folds must be at least 2, got {}'.format(args.folds))
    if args.no_save:
        parser.error('cross-validation evaluates the saved fold checkpoints; drop --no-save')
    if args.data is None or os.path.isdir(args.data):
        parser.error('cross-validation needs a single manifest file as data')
    args.cv_metric = 'auc' if args.stage == 'ganomaly' else 'accuracy'
    main(args)


if __name__ == '__main__':
    sys.exit(cli_main())

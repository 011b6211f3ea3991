#!/usr/bin/env python3 -u
# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.
"""
Score the images of one split with a trained GANomaly checkpoint and write
the raw scores, their histogram and optionally the reconstruction error maps.
"""

import os
import sys

import numpy as np

from retinakit import calibration, checkpoint_utils, imaging, metrics, options
from retinakit.data import EpochBatchIterator, HEALTHY_LABEL
from retinakit.models.ganomaly import RECON_WEIGHT, anomaly_score
from retinakit.tasks.retina_task import SPLITS


def score_split(model, task, split, batch_size=16, recon_weight=RECON_WEIGHT, frac=0.1):
    """One :class:`~retinakit.models.ganomaly.AnomalyRecord` per image of
    *split*, labeled from the manifest."""
    dataset = task.load_dataset(split)
    manifest = task.manifest(split)
    itr = EpochBatchIterator(dataset, batch_size).next_epoch_itr(shuffle=False)
    records = []
    for sample in itr:
        batch = anomaly_score(model, sample['net_input']['x'], recon_weight=recon_weight, frac=frac)
        for i, rec in zip(sample['id'], batch):
            entry = manifest[i]
            rec.label, rec.dataset_tag, rec.path = entry.label, entry.dataset_tag, entry.path
            records.append(rec)
    return records


def main(args):
    model, task, state = checkpoint_utils.load_model_for_inference(
        args.path, arg_overrides={'data': args.data} if args.data else None,
    )
    if state['stage'] != 'ganomaly':
        raise ValueError('{} holds a {} model; anomaly-score needs a ganomaly checkpoint'.format(
            args.path, state['stage']))
    records = score_split(model, task, args.split, args.batch_size, args.score_recon_weight, args.percentile_frac)

    rows = [(r.path, r.label, r.dataset_tag, r.score) for r in records]
    if args.results_path is not None:
        calibration.write_scores(args.results_path, rows)
        print('| wrote {} scores to {}'.format(len(rows), args.results_path), flush=True)
    else:
        sys.stdout.write('\t'.join(calibration.SCORE_FIELDS) + '\n')
        for row in rows:
            sys.stdout.write('{}\t{}\t{}\t{!r}\n'.format(*row))

    healthy = [r.score for r in records if r.label == HEALTHY_LABEL]
    pathology = [r.score for r in records if r.label != HEALTHY_LABEL]
    if healthy and pathology:
        roc_auc = metrics.auc(healthy + pathology, [False] * len(healthy) + [True] * len(pathology))
        print('| AUC (non-{} vs {}) = {:.4f} over {} images'.format(
            HEALTHY_LABEL, HEALTHY_LABEL, roc_auc, len(records)), flush=True)
    if args.histogram is not None:
        calibration.write_score_histogram(args.histogram, healthy, pathology, args.bins)

    if args.maps_dir is not None:
        os.makedirs(args.maps_dir, exist_ok=True)
        for r in records:
            stem = os.path.splitext(r.path.replace(os.sep, '_'))[0]
            errors = r.error_map / max(float(r.error_map.max()), 1e-12)
            imaging.save_png(errors, os.path.join(args.maps_dir, stem + '_error.png'))
            imaging.save_png(r.p90_map.astype(np.float64), os.path.join(args.maps_dir, stem + '_p90.png'))
    return records


def get_parser(prog=None):
    parser = options.get_parser('Anomaly scoring', prog=prog)
    group = parser.add_argument_group('Anomaly scoring')
    options.add_common_eval_args(group)
    # fmt: off
    group.add_argument('--split', default='test', choices=SPLITS,
                       help='split to score')
    group.add_argument('--data', metavar='PATH',
                       help='manifest or split directory (default: the one the model was trained on)')
    group.add_argument('--score-recon-weight', default=RECON_WEIGHT, type=float, metavar='W',
                       help='weight of the mean absolute reconstruction error in the score '
                            '(0 scores the latent deviation alone)')
    group.add_argument('--percentile-frac', default=0.1, type=float, metavar='F',
                       help='fraction of pixels marked in the error maps')
    group.add_argument('--histogram', metavar='FILE',
                       help='write the healthy/pathology score histogram as TSV')
    group.add_argument('--bins', default=30, type=int, metavar='N',
                       help='number of histogram bins')
    group.add_argument('--maps-dir', metavar='DIR',
                       help='write the reconstruction error and p90 maps as PNG')
    # fmt: on
    return parser


def cli_main(argv=None, prog=None):
    parser = get_parser(prog)
    args = options.parse_args(parser, argv)
    main(args)


if __name__ == '__main__':
    sys.exit(cli_main())

#!/usr/bin/env python3 -u
# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.
"""
Fit the Bayesian score calibration on labeled anomaly scores, then write the
calibrated posteriors and the per-class mean posterior table.
"""

from collections import OrderedDict
import sys

from retinakit import calibration, options
from retinakit.data import DataError, HEALTHY_LABEL


def split_by_class(rows):
    healthy = [r['score'] for r in rows if r['label'] == HEALTHY_LABEL]
    pathology = [r['score'] for r in rows if r['label'] != HEALTHY_LABEL]
    return healthy, pathology


def group_by_label(rows):
    groups = OrderedDict()
    for r in rows:
        groups.setdefault(r['label'], []).append(r['score'])
    # healthy first, then the other labels in order of appearance
    if HEALTHY_LABEL in groups:
        groups.move_to_end(HEALTHY_LABEL, last=False)
    return groups


def main(args):
    rows = calibration.read_scores(args.scores)
    fit_rows = calibration.read_scores(args.fit_scores) if args.fit_scores else rows
    if not rows:
        raise DataError('{} holds no scores'.format(args.scores))

    healthy, pathology = split_by_class(fit_rows)
    model = calibration.fit(healthy, pathology, backend=args.backend, prior_pathology=args.prior_pathology)
    print('| {}'.format(model), flush=True)

    if args.output is not None:
        posteriors = model.posterior_array([r['score'] for r in rows])
        calibration.write_scores(args.output, [
            (r['path'], r['label'], r['dataset_tag'], r['score'], float(p))
            for r, p in zip(rows, posteriors)
        ])
        print('| wrote {} calibrated scores to {}'.format(len(rows), args.output), flush=True)
    if args.histogram is not None:
        calibration.write_score_histogram(args.histogram, *split_by_class(rows), bins=args.bins)

    table = calibration.per_class_mean_posterior(group_by_label(rows), model)
    text = calibration.format_table(table)
    if args.results_path is not None:
        with open(args.results_path, 'w', encoding='utf-8') as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    return model, table


def get_parser(prog=None):
    parser = options.get_parser('Score calibration', prog=prog)
    group = parser.add_argument_group('Calibration')
    # fmt: off
    group.add_argument('--scores', required=True, metavar='FILE',
                       help='score file written by anomaly-score')
    group.add_argument('--fit-scores', metavar='FILE',
                       help='score file the densities are fitted on (default: --scores)')
    group.add_argument('--backend', default='kde', choices=calibration.BACKENDS,
                       help='class-conditional density estimator')
    group.add_argument('--prior-pathology', type=float, metavar='P',
                       help='prior probability of pathology (default: empirical frequency)')
    group.add_argument('--output', metavar='FILE',
                       help='write the scores with their posterior as TSV')
    group.add_argument('--histogram', metavar='FILE',
                       help='write the healthy/pathology score histogram as TSV')
    group.add_argument('--bins', default=30, type=int, metavar='N',
                       help='number of histogram bins')
    group.add_argument('--results-path', metavar='FILE',
                       help='write the per-class table to FILE instead of stdout')
    # fmt: on
    return parser


def cli_main(argv=None, prog=None):
    parser = get_parser(prog)
    args = options.parse_args(parser, argv)
    main(args)


if __name__ == '__main__':
    sys.exit(cli_main())

#!/usr/bin/env python3 -u
# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.
"""
Split a manifest into stratified train / valid / test manifests, written as
``train.tsv``, ``valid.tsv`` and ``test.tsv`` into one directory that
``train --data`` accepts.
"""

import os
import sys

from retinakit import options
from retinakit.data import Manifest, SplitSpec, compute_dataset_stats, filter_quality, stratified_split
from retinakit.data.data_utils import STRATIFY_CHOICES


def main(args):
    manifest = Manifest.load(args.manifest)
    if not args.no_quality_filter:
        manifest = filter_quality(manifest)
    if args.stats:
        manifest = manifest.with_stats(compute_dataset_stats(manifest, side=args.side))
        for tag, (mean, std) in manifest.stats.items():
            print('| stats {}: mean {:.4f}, std {:.4f}'.format(tag, mean, std), flush=True)

    spec = SplitSpec(args.valid_frac, args.test_frac, seed=args.seed, stratify_by=args.stratify_by)
    parts = stratified_split(manifest, spec)

    os.makedirs(args.out_dir, exist_ok=True)
    for name, part in zip(('train', 'valid', 'test'), parts):
        part.relocated(args.out_dir).save(os.path.join(args.out_dir, name + '.tsv'))
    print('| split {}: train {}, valid {}, test {} -> {}'.format(
        spec, *[len(p) for p in parts], args.out_dir), flush=True)
    return parts


def get_parser(prog=None):
    parser = options.get_parser('Stratified split', prog=prog)
    group = parser.add_argument_group('Split')
    # fmt: off
    group.add_argument('manifest', metavar='MANIFEST',
                       help='manifest file to split')
    group.add_argument('--val', '--valid-frac', dest='valid_frac', default=0.15, type=float, metavar='F',
                       help='fraction of every stratum used for validation')
    group.add_argument('--test', '--test-frac', dest='test_frac', default=0.15, type=float, metavar='F',
                       help='fraction of every stratum used for testing')
    group.add_argument('--stratify-by', default='label_dataset', choices=STRATIFY_CHOICES,
                       help='strata of the split')
    group.add_argument('--out-dir', default='splits', metavar='DIR',
                       help='directory receiving train.tsv, valid.tsv and test.tsv')
    group.add_argument('--no-quality-filter', action='store_true',
                       help='keep records flagged as low quality')
    group.add_argument('--stats', action='store_true',
                       help='store per-dataset pixel mean and std in the manifests (for --zscore)')
    group.add_argument('--side', default=224, type=int, metavar='N',
                       help='image side used when computing --stats')
    # fmt: on
    return parser


def cli_main(argv=None, prog=None):
    parser = get_parser(prog)
    args = options.parse_args(parser, argv)
    if args.seed is None:
        parser.error('the following arguments are required: --seed')
    try:
        SplitSpec(args.valid_frac, args.test_frac, stratify_by=args.stratify_by)
    except ValueError as e:
        parser.error(str(e))
    main(args)


if __name__ == '__main__':
    sys.exit(cli_main())

#!/usr/bin/env python3 -u
# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.
"""
Write the synthetic shapes corpus: healthy fundus-like disks and anomalous
ones carrying bright lesions, plus ``manifest.tsv``.
"""

import sys

from retinakit import options
from retinakit.data import generate_shapes_dataset


def main(args):
    manifest = generate_shapes_dataset(
        args.out_dir, args.n_healthy, args.n_anomalous, side=args.side, seed=args.seed,
        dataset_tag=args.dataset_tag,
    )
    print('| wrote {} images ({} healthy, {} anomalous) to {}'.format(
        len(manifest), args.n_healthy, args.n_anomalous, args.out_dir), flush=True)
    return manifest


def get_parser(prog=None):
    parser = options.get_parser('Synthetic shapes corpus', prog=prog)
    group = parser.add_argument_group('Shapes')
    # fmt: off
    group.add_argument('--out-dir', default='shapes', metavar='DIR',
                       help='output directory')
    group.add_argument('--n-healthy', default=400, type=int, metavar='N',
                       help='number of healthy images')
    group.add_argument('--n-anomalous', default=100, type=int, metavar='N',
                       help='number of anomalous images')
    group.add_argument('--side', default=64, type=int, metavar='N',
                       help='image side in pixels')
    group.add_argument('--dataset-tag', default='shapes', metavar='TAG',
                       help='dataset tag of every record')
    # fmt: on
    return parser


def cli_main(argv=None, prog=None):
    parser = get_parser(prog)
    args = options.parse_args(parser, argv)
    if args.seed is None:
        parser.error('the following arguments are required: --seed')
    if args.n_healthy < 0 or args.n_anomalous < 0:
        parser.error('image counts must be non-negative')
    main(args)


if __name__ == '__main__':
    sys.exit(cli_main())

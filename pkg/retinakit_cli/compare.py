#!/usr/bin/env python3 -u
# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.
"""
Paired t-test of two k-fold metric files (one value per line, fold order).
"""

import sys

from retinakit import metrics, options


def main(args):
    a = metrics.read_metric_file(args.a)
    b = metrics.read_metric_file(args.b)
    t, p = metrics.paired_ttest_kfold(a, b)
    print('k\t{}'.format(len(a)))
    print('mean_a\t{:.6f}'.format(sum(a) / len(a)))
    print('mean_b\t{:.6f}'.format(sum(b) / len(b)))
    print('t\t{:.6f}'.format(t))
    print('p\t{:.6f}'.format(p), flush=True)
    return t, p


def get_parser(prog=None):
    parser = options.get_parser('Compare k-fold results', prog=prog)
    group = parser.add_argument_group('Compare')
    # fmt: off
    group.add_argument('--a', required=True, metavar='FILE',
                       help='per-fold metric values of the first model')
    group.add_argument('--b', required=True, metavar='FILE',
                       help='per-fold metric values of the second model')
    # fmt: on
    return parser


def cli_main(argv=None, prog=None):
    parser = get_parser(prog)
    args = options.parse_args(parser, argv)
    main(args)


if __name__ == '__main__':
    sys.exit(cli_main())

#!/usr/bin/env python3 -u
# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.
"""
Render one image under every augmentation setup, side by side.
"""

import sys

from retinakit import imaging, options


def main(args):
    sample = imaging.load_and_standardize(args.image, side=args.side)
    policy_kwargs = {
        'translation_frac': args.translation_frac,
        'blur_sigma': (0., args.max_blur_sigma),
        'brightness': (1. - args.jitter, 1. + args.jitter),
        'contrast': (1. - args.jitter, 1. + args.jitter),
        'laplace_strength': args.laplace_strength,
        'interpolation': args.interpolation,
    }
    panel = imaging.preview_panel(sample, seed=args.seed, policy_kwargs=policy_kwargs)
    imaging.save_png(panel, args.output)
    print('| wrote {} ({}) to {}'.format(args.image, ', '.join(imaging.STAGES), args.output), flush=True)
    return panel


def get_parser(prog=None):
    parser = options.get_parser('Augmentation preview', prog=prog)
    parser.set_defaults(seed=0)
    group = parser.add_argument_group('Augmentation preview')
    # fmt: off
    group.add_argument('--image', required=True, metavar='FILE',
                       help='image to augment')
    group.add_argument('--output', required=True, metavar='FILE',
                       help='PNG file to write')
    group.add_argument('--side', default=224, type=int, metavar='N',
                       help='side of the standardized image')
    group.add_argument('--translation-frac', default=0.1, type=float, metavar='F',
                       help='maximum translation as a fraction of the side')
    group.add_argument('--max-blur-sigma', default=1.5, type=float, metavar='S',
                       help='upper bound of the Gaussian blur sigma')
    group.add_argument('--jitter', default=0.2, type=float, metavar='F',
                       help='brightness/contrast factors are drawn from [1-F, 1+F]')
    group.add_argument('--laplace-strength', default=1.0, type=float, metavar='F',
                       help='strength of the Laplacian enhancement')
    group.add_argument('--interpolation', default='bilinear', choices=['bilinear', 'nearest'],
                       help='interpolation of the geometric augmentation')
    # fmt: on
    return parser


def cli_main(argv=None, prog=None):
    parser = get_parser(prog)
    args = options.parse_args(parser, argv)
    main(args)


if __name__ == '__main__':
    sys.exit(cli_main())

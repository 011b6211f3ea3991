#!/usr/bin/env python3 -u
# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.
"""
Saliency maps of one image under a trained checkpoint, written as PNG.
"""

import os
import sys

import numpy as np

from retinakit import checkpoint_utils, explain, imaging, options


CLASSIFIER_STAGES = ('vit', 'vit+mask')


def _target_index(model, classes, x, target):
    if target is not None:
        if target not in classes:
            raise ValueError('unknown target class {!r} (classes: {})'.format(target, ', '.join(classes)))
        return classes.index(target)
    return int(explain.class_scores(x, model).argmax())


def compute_map(method, model, stage, x, target, args):
    if method == 'recon':
        if stage != 'ganomaly':
            raise ValueError('method recon needs a ganomaly checkpoint, got {}'.format(stage))
        return explain.reconstruction_map(x, model, frac=args.percentile_frac)
    if method == 'mask':
        if stage != 'mask' and getattr(model, 'mask_net', None) is None:
            raise ValueError('method mask needs a checkpoint with a mask network, got {}'.format(stage))
        return explain.attention_mask_map(x, model)
    if stage not in CLASSIFIER_STAGES:
        raise ValueError('method {} needs a classifier checkpoint, got {}'.format(method, stage))
    if method in ('occlusion8', 'occlusion16'):
        return explain.occlusion(x, model, target, patch=int(method[len('occlusion'):]),
                                 baseline_value=args.baseline_value, frac=args.percentile_frac)
    if method == 'intgrad':
        baseline = None if args.ig_baseline == 'black' else np.full_like(x, x.mean())
        return explain.integrated_gradients(x, model, target, baseline=baseline, steps=args.steps)
    if method == 'gradcam':
        return explain.grad_cam(x, model, target, block_index=args.block_index)
    raise ValueError('unknown method {}'.format(method))


def main(args):
    model, task, state = checkpoint_utils.load_model_for_inference(args.path)
    stage = state['stage']
    side = state['args'].image_side
    sample = imaging.load_and_standardize(args.image, side=side)
    x = sample.pixels.transpose(2, 0, 1)

    target = None
    if stage in CLASSIFIER_STAGES:
        target = _target_index(model, task.classes, x, args.target)
        print('| target class {}'.format(task.classes[target]), flush=True)

    if args.method == 'panel':
        methods = [m for m in explain.PANEL_ORDER if m != 'mask' or getattr(model, 'mask_net', None) is not None]
        maps = [compute_map(m, model, stage, x, target, args) for m in methods]
        explain.export_panel(x, maps, args.output)
        print('| wrote {} panel ({}) to {}'.format(
            args.image, ', '.join(['original'] + methods), args.output), flush=True)
        return maps

    saliency = compute_map(args.method, model, stage, x, target, args)
    saliency.save_png(args.output)
    print('| wrote {} map to {} (range [{:.4g}, {:.4g}])'.format(
        saliency.method, args.output, *saliency.value_range), flush=True)
    if saliency.p90 is not None:
        p90_path = os.path.splitext(args.output)[0] + '_p90.png'
        imaging.save_png(saliency.p90.astype(np.float64), p90_path)
        print('| wrote p90 map to {}'.format(p90_path), flush=True)
    return [saliency]


def get_parser(prog=None):
    parser = options.get_parser('Explain', prog=prog)
    group = parser.add_argument_group('Explain')
    # fmt: off
    group.add_argument('--checkpoint', '--path', dest='path', metavar='FILE', required=True,
                       help='path to the model checkpoint')
    group.add_argument('--image', required=True, metavar='FILE',
                       help='image to explain')
    group.add_argument('--method', required=True, choices=explain.METHODS + ('panel',),
                       help='saliency method, or panel for every classifier method side by side')
    group.add_argument('--output', required=True, metavar='FILE',
                       help='PNG file to write')
    group.add_argument('--target', metavar='CLASS',
                       help='class whose score is explained (default: the predicted class)')
    group.add_argument('--baseline-value', type=float, metavar='V',
                       help='occlusion fill value (default: the mean pixel value of the image)')
    group.add_argument('--ig-baseline', default='black', choices=['black', 'mean'],
                       help='integrated gradients baseline image')
    group.add_argument('--steps', default=64, type=int, metavar='N',
                       help='integrated gradients path steps')
    group.add_argument('--block-index', default=-1, type=int, metavar='N',
                       help='transformer block whose input tokens Grad-CAM explains (-1: the last)')
    group.add_argument('--percentile-frac', default=0.1, type=float, metavar='F',
                       help='fraction of pixels (or occlusion tiles) marked in the p90 maps')
    # fmt: on
    return parser


def cli_main(argv=None, prog=None):
    parser = get_parser(prog)
    args = options.parse_args(parser, argv)
    main(args)


if __name__ == '__main__':
    sys.exit(cli_main())

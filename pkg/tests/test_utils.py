# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

from collections import OrderedDict
import contextlib
import io
import json
import os
import tempfile
import unittest

import numpy as np

from retinakit import progress_bar, utils
from retinakit.autograd import Tensor
from retinakit.meters import AverageMeter, ConfusionMeter

from tests.utils import dummy_args


class TestUtils(unittest.TestCase):

    def test_top_fraction_count(self):
        self.assertEqual(utils.top_fraction_count(64), 7)
        self.assertEqual(utils.top_fraction_count(1024), 103)
        # 0.1 * 30 is 3.0000000000000004 in binary floating point
        self.assertEqual(utils.top_fraction_count(30), 3)
        self.assertEqual(utils.top_fraction_count(3), 1)

    def test_top_fraction_indices_tie_break(self):
        np.testing.assert_array_equal(utils.top_fraction_indices(np.zeros(20)), [18, 19])
        values = np.array([5., 1., 5., 0.])
        np.testing.assert_array_equal(utils.top_fraction_indices(values, frac=0.5), [0, 2])

    def test_top_fraction_mask(self):
        values = np.arange(20.).reshape(2, 10)
        mask = utils.top_fraction_mask(values)
        self.assertEqual(mask.shape, (2, 10))
        self.assertTrue(mask[1, 8:].all())
        self.assertEqual(mask.sum(), 2)

        batch = np.stack([values, -values])
        masks = utils.top_fraction_mask(batch)
        self.assertEqual(masks.shape, (2, 2, 10))
        self.assertTrue(masks[1, 0, :2].all())
        self.assertEqual(masks[1].sum(), 2)

    def test_minmax_normalize(self):
        out, value_range = utils.minmax_normalize([[2., 4.], [6., 10.]])
        np.testing.assert_allclose(out, [[0., 0.25], [0.5, 1.]])
        self.assertEqual(value_range, (2., 10.))
        out, value_range = utils.minmax_normalize(np.full(3, 7.))
        np.testing.assert_array_equal(out, 0.)
        self.assertEqual(value_range, (7., 7.))

    def test_item_and_as_array(self):
        t = Tensor(np.array([[1.5]]))
        self.assertEqual(utils.item(t), 1.5)
        self.assertEqual(utils.item(np.array(2.)), 2.)
        self.assertEqual(utils.item(3), 3)
        np.testing.assert_array_equal(utils.as_array(t), t.data)
        np.testing.assert_array_equal(utils.as_array([1, 2]), [1, 2])

    def test_float_tuple(self):
        self.assertEqual(utils.float_tuple('(0.9, 0.999)'), (0.9, 0.999))
        self.assertEqual(utils.float_tuple('[1e-3,2]'), (1e-3, 2.))
        self.assertEqual(utils.float_tuple([1, 2]), (1., 2.))
        self.assertEqual(utils.float_tuple('()'), ())
        with self.assertRaises(ValueError):
            utils.float_tuple('(0.9, beta)')

    def test_checkpoint_paths(self):
        with tempfile.TemporaryDirectory('test_utils') as d:
            for name in ('checkpoint2.pt', 'checkpoint10.pt', 'checkpoint1.pt', 'checkpoint_last.pt'):
                open(os.path.join(d, name), 'w').close()
            paths = utils.checkpoint_paths(d)
        self.assertEqual([os.path.basename(p) for p in paths], ['checkpoint10.pt', 'checkpoint2.pt', 'checkpoint1.pt'])


class TestMeters(unittest.TestCase):

    def test_average_meter(self):
        meter = AverageMeter()
        meter.update(2., n=3)
        meter.update(6.)
        self.assertEqual(meter.avg, 3.)
        self.assertEqual(meter.count, 4)

    def test_confusion_meter(self):
        meter = ConfusionMeter(2)
        meter.update([0, 1, 1], [0, 0, 1], tags=['a', 'b', 'a'])
        np.testing.assert_array_equal(meter.matrix, [[1, 0], [1, 1]])
        self.assertAlmostEqual(meter.avg, 2 / 3.)
        np.testing.assert_array_equal(meter.by_tag['a'], [[1, 0], [0, 1]])
        meter.reset()
        self.assertEqual(meter.avg, 0.)




class TestProgressBar(unittest.TestCase):

    def test_flatten_stats(self):
        meter = AverageMeter()
        meter.update(0.5)
        flat = progress_bar.flatten_stats(OrderedDict([
            ('loss', meter), ('accuracy', np.float64(0.75)), ('sample_size', 8), ('done', True),
            ('by_dataset', OrderedDict([('aptos', 0.25), ('shapes', 1.0)])), ('predictions', [0, 1]),
        ]))
        self.assertEqual(list(flat), ['loss', 'accuracy', 'by_dataset/aptos', 'by_dataset/shapes'])
        self.assertEqual(progress_bar.format_stat(flat['loss']), '0.500')
        self.assertEqual(progress_bar.format_stat(flat['by_dataset/aptos']), '0.25')

    def test_json_bar(self):
        args = dummy_args(log_format='json', no_progress_bar=False, log_interval=1)
        bar = progress_bar.build_progress_bar(args, [1, 2, 3], epoch=2)
        out = io.StringIO()
        with contextlib.redirect_stdout(out):
            for i, _ in enumerate(bar):
                bar.log({'loss': float(i)})
            bar.print({'loss': np.float32(0.5), 'by_dataset': {'shapes': 1.0}}, tag='valid')
        records = [json.loads(line) for line in out.getvalue().splitlines()]
        self.assertEqual(records[0], {'epoch': 2, 'update': 1.333, 'loss': 1.0})
        self.assertEqual(records[-1], {'epoch': 2, 'split': 'valid', 'loss': 0.5, 'by_dataset/shapes': 1.0})

    def test_unknown_format(self):
        args = dummy_args(log_format='csv', no_progress_bar=False, log_interval=1)
        with self.assertRaises(ValueError):
            progress_bar.build_progress_bar(args, [])


if __name__ == '__main__':
    unittest.main()

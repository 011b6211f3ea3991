# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

import os
import tempfile
import unittest

from retinakit.run_log import CURVE_FIELDS, RUNLOG_FIELDS, RunLog, read_tsv


class TestRunLog(unittest.TestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory('test_run_log')
        self.dir = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def _path(self, name):
        return os.path.join(self.dir, name)

    def test_classifier_epochs(self):
        log = RunLog(self.dir)
        log.log_epoch(1, 1e-3, 5, {'loss': 0.5, 'accuracy': 0.75},
                      {'loss': 0.625, 'accuracy': 0.5, 'by_dataset': {'aptos': 0.25, 'shapes': 1.0}})
        log.log_epoch(2, 5e-4, 10, {'loss': 0.4})

        with open(self._path('runlog.tsv')) as f:
            self.assertEqual(f.readline().rstrip('\n').split('\t'), list(RUNLOG_FIELDS))
        rows = read_tsv(self._path('runlog.tsv'))
        self.assertEqual(len(rows), 2)
        self.assertEqual(rows[0]['epoch'], 1)
        self.assertEqual(rows[0]['lr'], 1e-3)
        self.assertEqual(rows[0]['valid_loss'], 0.625)
        self.assertEqual(rows[1]['num_updates'], 10)
        self.assertIsNone(rows[1]['train_accuracy'])
        self.assertIsNone(rows[1]['valid_loss'])

        by_dataset = read_tsv(self._path('dataset_accuracy.tsv'))
        self.assertEqual([(r['dataset_tag'], r['accuracy']) for r in by_dataset], [('aptos', 0.25), ('shapes', 1.0)])
        self.assertEqual(read_tsv(self._path('loss_curves.tsv')), [])

    def test_loss_curves(self):
        log = RunLog(self.dir)
        log.log_epoch(1, 1e-4, 3, {'loss': 2.0, 'rec': 0.5, 'adv': 0.1, 'lat': 0.2, 'kl': 0.3, 'disc': 1.3},
                      {'loss': 2.5, 'rec': 0.6})
        rows = read_tsv(self._path('loss_curves.tsv'))
        self.assertEqual(list(rows[0]), list(CURVE_FIELDS))
        self.assertEqual([r['split'] for r in rows], ['train', 'valid'])
        self.assertEqual(rows[0]['kl'], 0.3)
        self.assertIsNone(rows[0]['mask'])
        self.assertIsNone(rows[1]['disc'])

    def test_resume_drops_later_epochs(self):
        log = RunLog(self.dir)
        for epoch in (1, 2, 3):
            log.log_epoch(epoch, 1e-3, epoch, {'loss': 1. / epoch})
        log = RunLog(self.dir, start_epoch=2)
        self.assertEqual([r['epoch'] for r in read_tsv(self._path('runlog.tsv'))], [1, 2])
        log.log_epoch(3, 1e-3, 3, {'loss': 0.3})
        self.assertEqual([r['train_loss'] for r in read_tsv(self._path('runlog.tsv'))], [1.0, 0.5, 0.3])

    def test_epochs_must_increase(self):
        log = RunLog(self.dir)
        log.log_epoch(1, 1e-3, 1, {'loss': 1.})
        with self.assertRaises(AssertionError):
            log.log_epoch(1, 1e-3, 1, {'loss': 1.})

    def test_fresh_run_truncates(self):
        RunLog(self.dir).log_epoch(1, 1e-3, 1, {'loss': 1.})
        RunLog(self.dir)
        self.assertEqual(read_tsv(self._path('runlog.tsv')), [])


if __name__ == '__main__':
    unittest.main()

# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

import contextlib
from io import StringIO
import os
import tempfile
import unittest

from retinakit import checkpoint_utils, options
from retinakit.calibration import read_scores
from retinakit.run_log import read_tsv
from retinakit_cli import evaluate
from retinakit_cli import train as train_cli
from retinakit_cli.main import cli_main

from tests.utils import ganomaly_train_argv, make_shapes_corpus, slow_test, vit_train_argv


def train(argv):
    parser = options.get_training_parser()
    args = options.parse_args_and_arch(parser, argv)
    with contextlib.redirect_stdout(StringIO()) as out:
        trainer = train_cli.main(args)
    return trainer, out.getvalue()


def run(argv):
    with contextlib.redirect_stdout(StringIO()), contextlib.redirect_stderr(StringIO()):
        return cli_main(argv)


class TestTrainClassifier(unittest.TestCase):

    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory('test_train')
        self.dir = self._tmp.name
        with contextlib.redirect_stdout(StringIO()):
            self.data = make_shapes_corpus(os.path.join(self.dir, 'shapes'))

    def tearDown(self):
        self._tmp.cleanup()

    def _save_dir(self, name):
        return os.path.join(self.dir, name)

    def test_two_epochs(self):
        save_dir = self._save_dir('run')
        trainer, out = train(vit_train_argv(self.data, save_dir, max_epoch=2))
        for name in ('checkpoint1.pt', 'checkpoint2.pt', 'checkpoint_best.pt', 'checkpoint_last.pt'):
            self.assertTrue(os.path.exists(os.path.join(save_dir, name)), name)
        self.assertIn('| final parameter checksum {}'.format(trainer.checksum()), out)

        rows = read_tsv(os.path.join(save_dir, 'runlog.tsv'))
        self.assertEqual([r['epoch'] for r in rows], [1, 2])
        self.assertEqual(rows[1]['num_updates'], 2 * rows[0]['num_updates'])
        self.assertEqual(rows[0]['lr'], 1e-3)
        self.assertTrue(0. <= rows[1]['valid_accuracy'] <= 1.)
        self.assertEqual(read_tsv(os.path.join(save_dir, 'dataset_accuracy.tsv'))[0]['dataset_tag'], 'shapes')

        state = checkpoint_utils.load_checkpoint_to_cpu(os.path.join(save_dir, 'checkpoint_last.pt'))
        self.assertEqual(state['checksum'], trainer.checksum())
        self.assertEqual(state['stage'], 'vit')
        self.assertEqual(state['extra_state']['train_iterator']['epoch'], 2)

    def test_same_seed_same_parameters(self):
        first, _ = train(vit_train_argv(self.data, self._save_dir('a'), max_epoch=1))
        second, _ = train(vit_train_argv(self.data, self._save_dir('b'), max_epoch=1))
        self.assertEqual(first.checksum(), second.checksum())

    def test_same_seed_same_eval_report(self):
        reports = []
        for name in ('a', 'b'):
            save_dir = self._save_dir(name)
            train(vit_train_argv(self.data, save_dir, max_epoch=1, seed=3))
            results = os.path.join(self.dir, name + '.txt')
            self.assertEqual(run(['eval', '--checkpoint', os.path.join(save_dir, 'checkpoint_last.pt'),
                                  '--results-path', results, '--fractions']), 0)
            with open(results, 'rb') as f:
                reports.append(f.read())
        self.assertGreater(len(reports[0]), 0)
        self.assertEqual(reports[0], reports[1])

    def test_train_loss_falls(self):
        with contextlib.redirect_stdout(StringIO()):
            data = make_shapes_corpus(os.path.join(self.dir, 'shapes64'), n_healthy=32, n_anomalous=32, seed=4)
        save_dir = self._save_dir('long')
        train(vit_train_argv(data, save_dir, max_epoch=20, extra=['--lr', '3e-3']))
        rows = read_tsv(os.path.join(save_dir, 'runlog.tsv'))
        self.assertEqual(len(rows), 20)
        self.assertLess(rows[-1]['train_loss'], 0.7 * rows[0]['train_loss'])

    def test_resume_matches_uninterrupted_run(self):
        straight, _ = train(vit_train_argv(self.data, self._save_dir('straight'), max_epoch=2))
        resumed_dir = self._save_dir('resumed')
        train(vit_train_argv(self.data, resumed_dir, max_epoch=1))
        resumed, out = train(vit_train_argv(self.data, resumed_dir, max_epoch=2))
        self.assertIn('| loaded checkpoint', out)
        self.assertEqual(resumed.get_num_updates(), straight.get_num_updates())
        self.assertEqual(resumed.checksum(), straight.checksum())
        rows = read_tsv(os.path.join(resumed_dir, 'runlog.tsv'))
        self.assertEqual([r['epoch'] for r in rows], [1, 2])

    def test_evaluate_checkpoint(self):
        save_dir = self._save_dir('run')
        train(vit_train_argv(self.data, save_dir, max_epoch=1))
        path = os.path.join(save_dir, 'checkpoint_last.pt')
        with contextlib.redirect_stdout(StringIO()):
            report = evaluate.evaluate(path, split='test', positive_class='Anomalous')
        self.assertEqual(report.cm.sum(), 2)
        self.assertEqual(report.classes, ['Normal', 'Anomalous'])
        self.assertEqual(list(report.by_dataset), ['shapes'])
        self.assertIsNotNone(report.auc)

        results = os.path.join(self.dir, 'report.txt')
        self.assertEqual(run(['eval', '--checkpoint', path, '--results-path', results]), 0)
        with open(results) as f:
            self.assertIn('accuracy\t', f.read())
        # a classifier checkpoint cannot score anomalies
        self.assertEqual(run(['anomaly-score', '--checkpoint', path]), 1)


class TestTrainAnomalyPipeline(unittest.TestCase):

    @slow_test
    def test_ganomaly_score_and_calibrate(self):
        with tempfile.TemporaryDirectory('test_train') as d:
            with contextlib.redirect_stdout(StringIO()):
                data = make_shapes_corpus(os.path.join(d, 'shapes'), n_healthy=24, n_anomalous=24)
            save_dir = os.path.join(d, 'gan')
            trainer, _ = train(ganomaly_train_argv(data, save_dir, max_epoch=2))
            self.assertGreater(trainer.get_num_updates(), 0)
            curves = read_tsv(os.path.join(save_dir, 'loss_curves.tsv'))
            self.assertEqual([(r['epoch'], r['split']) for r in curves],
                             [(1, 'train'), (1, 'valid'), (2, 'train'), (2, 'valid')])
            self.assertIsNotNone(curves[0]['kl'])

            scores = os.path.join(d, 'scores.tsv')
            checkpoint = os.path.join(save_dir, 'checkpoint_last.pt')
            self.assertEqual(run(['anomaly-score', '--checkpoint', checkpoint, '--split', 'test',
                                  '--results-path', scores]), 0)
            rows = read_scores(scores)
            self.assertEqual(set(r['label'] for r in rows), {'Normal', 'Anomalous'})
            self.assertTrue(all(r['score'] >= 0 for r in rows))

    def test_masked_classifier_from_pretrained_vit(self):
        with tempfile.TemporaryDirectory('test_train') as d:
            with contextlib.redirect_stdout(StringIO()):
                data = make_shapes_corpus(os.path.join(d, 'shapes'))
            vit_dir = os.path.join(d, 'vit')
            train(vit_train_argv(data, vit_dir, max_epoch=1))
            masked_dir = os.path.join(d, 'masked')
            argv = vit_train_argv(data, masked_dir, max_epoch=1, extra=[
                '--classifier-checkpoint', os.path.join(vit_dir, 'checkpoint_last.pt'),
            ])
            argv[argv.index('vit')] = 'vit+mask'
            argv[argv.index('vit_toy')] = 'masked_vit_toy'
            trainer, out = train(argv)
            self.assertIn('| initialized classifier from', out)
            state = checkpoint_utils.load_checkpoint_to_cpu(os.path.join(masked_dir, 'checkpoint_last.pt'))
            self.assertEqual(state['stage'], 'vit+mask')
            self.assertTrue(any(k.startswith('mask_net.') for k in state['model']))


if __name__ == '__main__':
    unittest.main()

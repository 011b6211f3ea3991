# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

import math
import os
import tempfile
import unittest

import numpy as np

from retinakit import metrics
from retinakit.data import DataError


CLASSES = ['Normal', 'DR', 'Glaucoma', 'AMD', 'MS', 'RP', 'DE']

# held-out test set, ViT trained with geometric augmentation
GEOMETRIC_CM = np.array([
    [287, 10, 34, 1, 2, 0, 0],
    [5, 245, 2, 1, 6, 2, 4],
    [34, 10, 174, 1, 10, 1, 0],
    [0, 2, 0, 24, 0, 0, 0],
    [3, 7, 5, 1, 47, 3, 1],
    [0, 1, 0, 0, 0, 20, 0],
    [2, 2, 0, 0, 0, 1, 14],
])

# same split, geometric augmentation plus the constrained attention mask
MASKED_CM = np.array([
    [305, 3, 23, 1, 2, 0, 0],
    [13, 229, 9, 0, 9, 1, 4],
    [45, 8, 163, 1, 12, 1, 0],
    [0, 3, 1, 22, 0, 0, 0],
    [3, 5, 7, 1, 48, 2, 1],
    [1, 0, 0, 0, 0, 20, 0],
    [2, 2, 0, 0, 0, 1, 14],
])


def _pairwise_auc(scores, labels):
    wins = 0.
    for p in scores[labels]:
        for q in scores[~labels]:
            wins += 1. if p > q else 0.5 if p == q else 0.
    return wins / (labels.sum() * (~labels).sum())


class TestConfusionMetrics(unittest.TestCase):

    def test_accuracy(self):
        self.assertEqual(GEOMETRIC_CM.sum(), 962)
        self.assertAlmostEqual(metrics.accuracy(GEOMETRIC_CM), 811 / 962.)
        self.assertAlmostEqual(metrics.accuracy(GEOMETRIC_CM), 0.843, delta=5e-4)
        self.assertAlmostEqual(metrics.accuracy(MASKED_CM), 0.832, delta=1e-3)
        self.assertEqual(metrics.accuracy(np.diag([3, 4, 5])), 1.)
        with self.assertRaises(ValueError):
            metrics.accuracy(np.zeros((2, 2)))

    def test_weighted_f1(self):
        self.assertEqual(metrics.weighted_f1(np.diag([3, 4])), 1.)
        f1 = metrics.per_class_f1([[8, 2], [3, 7]])
        np.testing.assert_allclose(f1, [16 / 21., 14 / 19.])
        self.assertAlmostEqual(metrics.weighted_f1([[8, 2], [3, 7]]), 0.749, places=3)
        self.assertTrue(0.83 <= metrics.weighted_f1(GEOMETRIC_CM) <= 0.85)

    def test_f1_of_never_predicted_class(self):
        cm = np.array([[5, 0], [5, 0]])
        self.assertEqual(metrics.per_class_f1(cm)[1], 0.)
        self.assertAlmostEqual(metrics.weighted_f1(cm), 0.5 * (2 * 0.5 / 1.5))

    def test_mcc(self):
        self.assertEqual(metrics.mcc(np.diag([2, 5, 1])), 1.)
        rank_one = np.outer([1, 2, 3], [2, 1, 1])
        self.assertAlmostEqual(metrics.mcc(rank_one), 0.)
        self.assertEqual(metrics.mcc([[4, 0], [6, 0]]), 0.)

        (tn, fp), (fn, tp) = [[8, 2], [3, 7]]
        binary = (tp * tn - fp * fn) / math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
        self.assertAlmostEqual(metrics.mcc([[8, 2], [3, 7]]), binary, places=12)

    def test_permutation_invariance(self):
        perm = np.random.RandomState(0).permutation(len(CLASSES))
        shuffled = GEOMETRIC_CM[perm][:, perm]
        for fn in (metrics.accuracy, metrics.weighted_f1, metrics.mcc):
            self.assertAlmostEqual(fn(shuffled), fn(GEOMETRIC_CM), places=12)

    def test_confusion_matrix(self):
        cm = metrics.confusion_matrix([0, 0, 1, 2, 2], [0, 1, 1, 2, 0], 3)
        np.testing.assert_array_equal(cm, [[1, 1, 0], [0, 1, 0], [1, 0, 1]])
        with self.assertRaises(ValueError):
            metrics.confusion_matrix([0, 1], [0], 2)
        with self.assertRaises(ValueError):
            metrics.accuracy([[1, -1], [0, 1]])
        with self.assertRaises(ValueError):
            metrics.mcc(np.zeros((2, 3)))

    def test_prediction_fractions(self):
        fractions = metrics.prediction_fractions([[8, 2], [0, 0]])
        np.testing.assert_allclose(fractions, [[0.8, 0.2], [0., 0.]])


class TestAuc(unittest.TestCase):

    def test_pairs(self):
        scores = [0.9, 0.4, 0.5, 0.1]
        labels = [True, True, False, False]
        self.assertEqual(metrics.auc(scores, labels), 0.75)
        self.assertEqual(metrics.auc([3., 4., 1., 2.], labels), 1.)
        self.assertEqual(metrics.auc(np.full(4, 0.3), labels), 0.5)

    def test_monotone_invariance(self):
        rng = np.random.RandomState(0)
        scores = rng.uniform(size=40)
        labels = rng.uniform(size=40) < 0.4
        reference = metrics.auc(scores, labels)
        for transform in (np.exp, lambda s: 5 * s + 3, lambda s: s ** 3):
            self.assertAlmostEqual(metrics.auc(transform(scores), labels), reference, places=12)
        self.assertAlmostEqual(metrics.auc(-scores, labels), 1. - reference, places=12)

    def test_matches_pairwise_count(self):
        rng = np.random.RandomState(0)
        for trial in range(1000):
            n = rng.randint(2, 51)
            labels = np.zeros(n, dtype=bool)
            labels[:rng.randint(1, n)] = True
            rng.shuffle(labels)
            if trial % 2 == 0:
                # few distinct values, many ties
                scores = rng.randint(0, 4, size=n).astype(np.float64)
            else:
                scores = rng.normal(size=n)
            self.assertEqual(metrics.auc(scores, labels), _pairwise_auc(scores, labels))

    def test_single_class(self):
        with self.assertRaises(ValueError):
            metrics.auc([0.1, 0.2], [True, True])


class TestPairedTTest(unittest.TestCase):

    def test_identical_folds(self):
        self.assertEqual(metrics.paired_ttest_kfold([0.8] * 10, [0.8] * 10), (0., 1.))

    def test_constant_shift(self):
        t, p = metrics.paired_ttest_kfold([2., 3., 4., 5.], [1., 2., 3., 4.])
        self.assertEqual(t, float('inf'))
        self.assertLess(p, 1e-6)

    def test_known_statistic(self):
        z = np.random.RandomState(0).randn(10)
        z = (z - z.mean()) / z.std(ddof=1)
        b = np.random.RandomState(1).uniform(0.7, 0.9, size=10)
        a = b + 0.002 + 0.01 * z
        t, p = metrics.paired_ttest_kfold(a, b)
        self.assertAlmostEqual(t, 0.632, places=3)
        self.assertAlmostEqual(p, 0.543, delta=1e-3)

    def test_symmetric(self):
        a, b = [0.81, 0.84, 0.83], [0.80, 0.82, 0.84]
        t, p = metrics.paired_ttest_kfold(a, b)
        t_rev, p_rev = metrics.paired_ttest_kfold(b, a)
        self.assertAlmostEqual(t, -t_rev)
        self.assertAlmostEqual(p, p_rev)

    def test_bad_input(self):
        with self.assertRaises(ValueError):
            metrics.paired_ttest_kfold([1., 2.], [1.])
        with self.assertRaises(ValueError):
            metrics.paired_ttest_kfold([1.], [1.])

    def test_metric_file(self):
        with tempfile.TemporaryDirectory('test_metrics') as d:
            path = os.path.join(d, 'folds.txt')
            with open(path, 'w') as f:
                f.write('# fold accuracies\n0.81\n\n0.84  # best\n')
            self.assertEqual(metrics.read_metric_file(path), [0.81, 0.84])
            with open(path, 'w') as f:
                f.write('0.81\nhigh\n')
            with self.assertRaises(DataError):
                metrics.read_metric_file(path)
            with self.assertRaises(DataError):
                metrics.read_metric_file(os.path.join(d, 'missing.txt'))


class TestEvalReport(unittest.TestCase):

    def test_report_from_confusion(self):
        report = metrics.EvalReport.from_confusion(GEOMETRIC_CM, CLASSES)
        text = report.to_string()
        self.assertIn('n\t962\n', text)
        self.assertIn('accuracy\t0.843035\n', text)
        grid = text.split('\n\n')[1].splitlines()
        self.assertEqual(len(grid), 1 + len(CLASSES))
        self.assertEqual(grid[1].split('\t')[1].strip(), '287')
        self.assertEqual(report.support.tolist(), GEOMETRIC_CM.sum(axis=1).tolist())
        with self.assertRaises(ValueError):
            metrics.EvalReport(GEOMETRIC_CM, CLASSES[:3])

    def test_per_dataset_breakdown_and_auc(self):
        targets = [0, 0, 1, 1]
        predictions = [0, 1, 1, 1]
        probs = np.array([[0.9, 0.1], [0.4, 0.6], [0.5, 0.5], [0.1, 0.9]])
        report = metrics.EvalReport.from_predictions(
            targets, predictions, ['Normal', 'DR'], tags=['a', 'b', 'a', 'b'], probs=probs, positive_class='DR',
        )
        self.assertEqual(list(report.by_dataset), ['a', 'b'])
        self.assertEqual(report.by_dataset['a'].accuracy, 1.)
        self.assertEqual(report.by_dataset['b'].accuracy, 0.5)
        self.assertEqual(report.auc, 0.75)
        text = report.to_string(fractions=True)
        self.assertIn('auc_DR\t0.750000', text)
        self.assertIn('b/accuracy\t0.500000', text)
        self.assertIn('Normal\t0.500\t0.500', text)

    def test_report_needs_probabilities_for_auc(self):
        with self.assertRaises(ValueError):
            metrics.EvalReport.from_predictions([0, 1], [0, 1], ['Normal', 'DR'], positive_class='DR')
        with self.assertRaises(ValueError):
            metrics.EvalReport.from_predictions([0, 1], [0, 1], ['Normal', 'DR'], probs=np.eye(2),
                                                positive_class='AMD')


if __name__ == '__main__':
    unittest.main()

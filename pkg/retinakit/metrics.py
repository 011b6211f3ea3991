# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

"""
Evaluation statistics over confusion matrices (rows are true classes,
columns predicted classes), rank AUC and the paired t-test over k-fold
results.
"""

from collections import OrderedDict
import math

import numpy as np
from scipy import stats

from retinakit.data.data_utils import DataError


def confusion_matrix(targets, predictions, num_classes):
    targets = np.asarray(targets, dtype=np.int64)
    predictions = np.asarray(predictions, dtype=np.int64)
    if targets.shape != predictions.shape:
        raise ValueError('{} targets for {} predictions'.format(targets.size, predictions.size))
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (targets, predictions), 1)
    return cm


def _check_cm(cm):
    cm = np.asarray(cm)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1] or cm.shape[0] == 0:
        raise ValueError('confusion matrix must be square and nonempty, got shape {}'.format(cm.shape))
    if (cm < 0).any():
        raise ValueError('confusion matrix has negative counts')
    return cm.astype(np.float64)


def accuracy(cm):
    cm = _check_cm(cm)
    total = cm.sum()
    if total == 0:
        raise ValueError('confusion matrix is empty (zero total)')
    return float(np.trace(cm) / total)


def per_class_f1(cm):
    """F1 of every class; classes with zero precision + recall get 0."""
    cm = _check_cm(cm)
    tp = np.diag(cm)
    predicted = cm.sum(axis=0)
    support = cm.sum(axis=1)
    precision = np.divide(tp, predicted, out=np.zeros_like(tp), where=predicted > 0)
    recall = np.divide(tp, support, out=np.zeros_like(tp), where=support > 0)
    denom = precision + recall
    return np.divide(2 * precision * recall, denom, out=np.zeros_like(tp), where=denom > 0)


def weighted_f1(cm):
    """Support-weighted mean of the per-class F1 scores."""
    cm = _check_cm(cm)
    support = cm.sum(axis=1)
    total = support.sum()
    if total == 0:
        raise ValueError('confusion matrix is empty (zero total)')
    return float((per_class_f1(cm) * support).sum() / total)


def mcc(cm):
    """Multi-class Matthews correlation coefficient (Gorodkin's R_K).

    Returns 0 when the denominator vanishes, e.g. for constant predictions.
    """
    cm = _check_cm(cm)
    c = np.trace(cm)
    s = cm.sum()
    p = cm.sum(axis=0)
    t = cm.sum(axis=1)
    denom = (s * s - (p * p).sum()) * (s * s - (t * t).sum())
    if denom <= 0:
        return 0.
    return float((c * s - (p * t).sum()) / math.sqrt(denom))


def auc(scores, is_positive):
    """Area under the ROC curve as the normalized Mann-Whitney U statistic.

    Tied (positive, negative) pairs count one half.
    """
    scores = np.asarray(scores, dtype=np.float64).ravel()
    is_positive = np.asarray(is_positive, dtype=bool).ravel()
    if scores.shape != is_positive.shape:
        raise ValueError('{} scores for {} labels'.format(scores.size, is_positive.size))
    n_pos = int(is_positive.sum())
    n_neg = is_positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError('AUC needs positive and negative samples (got {} / {})'.format(n_pos, n_neg))
    ranks = stats.rankdata(scores)
    u = ranks[is_positive].sum() - n_pos * (n_pos + 1) / 2.
    return float(u / (n_pos * n_neg))


def paired_ttest_kfold(metric_a, metric_b):
    """Two-sided paired t-test over per-fold metric values.

    Returns ``(t, p)``. Zero variance of the differences gives ``(0, 1)``
    for identical folds and ``(+-inf, 0)`` for a constant shift.
    """
    a = np.asarray(metric_a, dtype=np.float64).ravel()
    b = np.asarray(metric_b, dtype=np.float64).ravel()
    if a.size != b.size:
        raise ValueError('paired samples differ in length: {} vs {}'.format(a.size, b.size))
    k = a.size
    if k < 2:
        raise ValueError('paired t-test needs at least 2 folds, got {}'.format(k))
    d = a - b
    mean = d.mean()
    sd = d.std(ddof=1)
    if sd == 0:
        if mean == 0:
            return 0., 1.
        return math.copysign(float('inf'), mean), 0.
    t = mean / (sd / math.sqrt(k))
    p = 2. * stats.t.sf(abs(t), k - 1)
    return float(t), float(p)


def read_metric_file(path):
    """One float per line; blank lines and ``#`` comments are skipped."""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise DataError('cannot read metric file {}: {}'.format(path, e))
    values = []
    for lineno, line in enumerate(lines, start=1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        try:
            values.append(float(line))
        except ValueError:
            raise DataError('{} line {}: expected a number, got {!r}'.format(path, lineno, line))
    return values


def prediction_fractions(cm):
    """Row-normalized confusion matrix: per true class, the fraction of
    predictions falling into each predicted class (empty rows stay 0)."""
    cm = _check_cm(cm)
    support = cm.sum(axis=1, keepdims=True)
    return np.divide(cm, support, out=np.zeros_like(cm), where=support > 0)


class EvalReport(object):
    """Pooled metrics of one evaluation plus the per-dataset breakdown.

    Args:
        cm (ndarray): C x C counts, rows true, columns predicted
        classes (list): class names in index order
        by_dataset (OrderedDict, optional): dataset tag -> :class:`EvalReport`
        auc (float, optional): one-vs-rest AUC of *positive_class*
    """

    def __init__(self, cm, classes, by_dataset=None, auc=None, positive_class=None):
        self.cm = np.asarray(cm, dtype=np.int64)
        self.classes = list(classes)
        if self.cm.shape != (len(self.classes), len(self.classes)):
            raise ValueError('confusion matrix {} does not match {} classes'.format(
                self.cm.shape, len(self.classes)))
        self.accuracy = accuracy(self.cm)
        self.weighted_f1 = weighted_f1(self.cm)
        self.mcc = mcc(self.cm)
        self.by_dataset = by_dataset or OrderedDict()
        self.auc = auc
        self.positive_class = positive_class

    @classmethod
    def from_confusion(cls, cm, classes):
        return cls(cm, classes)

    @classmethod
    def from_predictions(cls, targets, predictions, classes, tags=None, probs=None, positive_class=None):
        """Build a report from per-image targets and predicted class indices.

        With *positive_class* and class probabilities *probs* (N x C), the
        one-vs-rest AUC of that class is added.
        """
        num_classes = len(classes)
        targets = np.asarray(targets, dtype=np.int64)
        predictions = np.asarray(predictions, dtype=np.int64)
        by_dataset = OrderedDict()
        if tags is not None:
            tags = np.asarray(tags)
            for tag in sorted(set(tags.tolist())):
                sel = tags == tag
                by_dataset[tag] = cls(
                    confusion_matrix(targets[sel], predictions[sel], num_classes), classes,
                )
        roc_auc = None
        if positive_class is not None:
            if positive_class not in classes:
                raise ValueError('unknown positive class {!r} (classes: {})'.format(
                    positive_class, ', '.join(classes)))
            if probs is None:
                raise ValueError('AUC needs class probabilities')
            pos = classes.index(positive_class)
            roc_auc = auc(np.asarray(probs)[:, pos], targets == pos)
        return cls(
            confusion_matrix(targets, predictions, num_classes), classes,
            by_dataset=by_dataset, auc=roc_auc, positive_class=positive_class,
        )

    @property
    def support(self):
        return self.cm.sum(axis=1)

    def metrics(self):
        out = OrderedDict([
            ('n', int(self.cm.sum())),
            ('accuracy', self.accuracy),
            ('weighted_f1', self.weighted_f1),
            ('mcc', self.mcc),
        ])
        if self.auc is not None:
            out['auc_{}'.format(self.positive_class)] = self.auc
        return out

    def _metric_lines(self, prefix=''):
        lines = []
        for k, v in self.metrics().items():
            value = str(v) if isinstance(v, int) else '{:.6f}'.format(v)
            lines.append('{}{}\t{}'.format(prefix, k, value))
        return lines

    def confusion_lines(self):
        width = max([len(c) for c in self.classes] + [len(str(int(self.cm.max()))), len('true\\pred')])
        fmt = '{:>' + str(width) + '}'
        lines = ['\t'.join(fmt.format(c) for c in ['true\\pred'] + self.classes)]
        for name, row in zip(self.classes, self.cm):
            lines.append('\t'.join(fmt.format(v) for v in [name] + [str(int(c)) for c in row]))
        return lines

    def fraction_lines(self):
        fractions = prediction_fractions(self.cm)
        lines = ['\t'.join(['true\\pred'] + self.classes)]
        for name, row in zip(self.classes, fractions):
            lines.append('\t'.join([name] + ['{:.3f}'.format(v) for v in row]))
        return lines

    def to_string(self, fractions=False):
        """One ``metric<TAB>value`` line per metric, per-dataset metrics
        prefixed with ``<tag>/``, then the confusion matrix grid."""
        lines = self._metric_lines()
        for tag, report in self.by_dataset.items():
            lines.extend(report._metric_lines(prefix='{}/'.format(tag)))
        lines.append('')
        lines.extend(self.confusion_lines())
        if fractions:
            lines.append('')
            lines.extend(self.fraction_lines())
        return '\n'.join(lines) + '\n'

    def __repr__(self):
        return 'EvalReport(accuracy={:.4f}, weighted_f1={:.4f}, mcc={:.4f})'.format(
            self.accuracy, self.weighted_f1, self.mcc)

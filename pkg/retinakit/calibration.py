# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

"""
Bayesian calibration of raw anomaly scores: class-conditional score
densities of healthy and pathological images turned into
``P(pathology | score)`` with Bayes' rule.
"""

from collections import OrderedDict
import math

import numpy as np
from scipy import stats

from retinakit.data.data_utils import DataError


BACKENDS = ('kde', 'histogram')
MIN_SCORES = 10
GRID_POINTS = 2048
HISTOGRAM_BINS = 64

SCORE_FIELDS = ('path', 'label', 'dataset_tag', 'score')


def _trapz(y, x):
    # np.trapz was renamed in numpy 2
    trapezoid = getattr(np, 'trapezoid', None) or np.trapz
    return float(trapezoid(y, x))


class KdeDensity(object):
    """Gaussian KDE with Silverman's bandwidth, normalized over *grid*."""

    def __init__(self, scores, grid=None):
        self.kde = stats.gaussian_kde(scores, bw_method='silverman')
        self.norm = 1.
        if grid is not None:
            self.normalize(grid)

    def normalize(self, grid):
        self.norm = _trapz(self.kde(grid), grid)
        return self

    @property
    def bandwidth(self):
        return float(math.sqrt(self.kde.covariance[0, 0]))

    def __call__(self, a):
        return self.kde(np.atleast_1d(np.asarray(a, dtype=np.float64))) / self.norm


class HistogramDensity(object):
    """Piecewise-constant density on fixed bins; zero outside them."""

    def __init__(self, scores, edges):
        self.edges = edges
        self.values, _ = np.histogram(scores, bins=edges, density=True)

    def __call__(self, a):
        a = np.atleast_1d(np.asarray(a, dtype=np.float64))
        idx = np.searchsorted(self.edges, a, side='right') - 1
        # the right edge belongs to the last bin
        idx[a == self.edges[-1]] = len(self.values) - 1
        inside = (idx >= 0) & (idx < len(self.values))
        out = np.zeros_like(a)
        out[inside] = self.values[idx[inside]]
        return out


class CalibrationModel(object):
    """Fitted class-conditional densities and class priors.

    Instances are immutable once fitted; use :func:`fit` to build one.
    """

    def __init__(self, healthy, pathology, prior_pathology, grid, backend):
        self.healthy = healthy
        self.pathology = pathology
        self.prior_pathology = float(prior_pathology)
        self.prior_healthy = 1. - self.prior_pathology
        self.grid = grid
        self.backend = backend

    @property
    def priors(self):
        return self.prior_healthy, self.prior_pathology

    def densities(self, a):
        """``(p(a | healthy), p(a | pathology))`` as arrays."""
        return self.healthy(a), self.pathology(a)

    def posterior_array(self, a):
        a = np.asarray(a, dtype=np.float64)
        d_h, d_p = self.densities(a.ravel())
        num = self.prior_pathology * d_p
        den = num + self.prior_healthy * d_h
        ok = np.isfinite(den) & (den > 0)
        post = np.full(num.shape, self.prior_pathology)
        post[ok] = num[ok] / den[ok]
        return np.clip(post, 0., 1.).reshape(a.shape)

    def state_dict(self):
        return OrderedDict([
            ('backend', self.backend),
            ('prior_healthy', self.prior_healthy),
            ('prior_pathology', self.prior_pathology),
            ('grid_min', float(self.grid[0])),
            ('grid_max', float(self.grid[-1])),
        ])

    def __repr__(self):
        return 'CalibrationModel(backend={}, priors=({:.3f}, {:.3f}), support=[{:.4g}, {:.4g}])'.format(
            self.backend, self.prior_healthy, self.prior_pathology, self.grid[0], self.grid[-1])


class CalibratedScore(object):

    def __init__(self, raw, posterior):
        self.raw = float(raw)
        self.posterior = float(posterior)

    def __repr__(self):
        return 'CalibratedScore(raw={:.6g}, posterior={:.4f})'.format(self.raw, self.posterior)


def _check_scores(scores, name):
    scores = np.asarray(scores, dtype=np.float64).ravel()
    if scores.size < MIN_SCORES:
        raise DataError('calibration needs at least {} {} scores, got {}'.format(MIN_SCORES, name, scores.size))
    if not np.isfinite(scores).all():
        raise DataError('{} scores contain non-finite values'.format(name))
    return scores


def fit(healthy_scores, pathology_scores, backend='kde', prior_pathology=None):
    """Fit a :class:`CalibrationModel`.

    Args:
        healthy_scores, pathology_scores: raw scores of each class (at
            least 10 each)
        backend (str): ``kde`` (Gaussian kernels, Silverman bandwidth) or
            ``histogram`` (64 bins)
        prior_pathology (float, optional): prior of the pathology class;
            defaults to its empirical frequency
    """
    if backend not in BACKENDS:
        raise ValueError('unknown density backend {!r} (choose from {})'.format(backend, ', '.join(BACKENDS)))
    healthy = _check_scores(healthy_scores, 'healthy')
    pathology = _check_scores(pathology_scores, 'pathology')
    if prior_pathology is None:
        prior_pathology = pathology.size / float(healthy.size + pathology.size)
    if not 0. <= prior_pathology <= 1.:
        raise ValueError('prior_pathology must lie in [0, 1], got {}'.format(prior_pathology))

    lo = min(healthy.min(), pathology.min())
    hi = max(healthy.max(), pathology.max())
    if backend == 'kde':
        for name, scores in (('healthy', healthy), ('pathology', pathology)):
            if np.std(scores) == 0:
                raise DataError('{} scores have zero variance; use the histogram backend'.format(name))
        densities = KdeDensity(healthy), KdeDensity(pathology)
        h = max(d.bandwidth for d in densities)
        grid = np.linspace(lo - 3 * h, hi + 3 * h, GRID_POINTS)
        return CalibrationModel(densities[0].normalize(grid), densities[1].normalize(grid),
                                prior_pathology, grid, backend)

    if hi == lo:
        hi = lo + 1.
    edges = np.linspace(lo, hi, HISTOGRAM_BINS + 1)
    return CalibrationModel(HistogramDensity(healthy, edges), HistogramDensity(pathology, edges),
                            prior_pathology, edges, backend)


def posterior(model, a):
    """Calibrated :class:`CalibratedScore` of raw score *a*.

    Where both densities vanish the prior of the pathology class is
    returned.
    """
    return CalibratedScore(a, model.posterior_array(np.float64(a))[()])


def calibrate(model, scores):
    return [CalibratedScore(a, p) for a, p in zip(scores, model.posterior_array(scores))]


def summarize(values):
    """Mean and sample standard deviation (0 for a single value)."""
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError('cannot summarize an empty group')
    std = float(values.std(ddof=1)) if values.size > 1 else 0.
    return float(values.mean()), std


def format_mean_std(mean, std):
    return '{:.2f}±{:.2f}'.format(mean, std)


def per_class_mean_posterior(groups, model):
    """Mean +- sample std of the posteriors of every labeled score group.

    Args:
        groups (dict): label -> raw scores

    Returns:
        OrderedDict label -> (mean, std)
    """
    table = OrderedDict()
    for label, scores in groups.items():
        if len(scores) == 0:
            raise ValueError('score group {!r} is empty'.format(label))
        table[label] = summarize(model.posterior_array(scores))
    return table


def format_table(table):
    lines = ['label\tmean_posterior']
    for label, (mean, std) in table.items():
        lines.append('{}\t{}'.format(label, format_mean_std(mean, std)))
    return '\n'.join(lines) + '\n'


def score_histogram(healthy_scores, pathology_scores, bins=30):
    """Shared bin edges and per-class counts of the raw scores."""
    healthy = np.asarray(healthy_scores, dtype=np.float64).ravel()
    pathology = np.asarray(pathology_scores, dtype=np.float64).ravel()
    both = np.concatenate([healthy, pathology])
    if both.size == 0:
        raise ValueError('no scores to histogram')
    edges = np.histogram_bin_edges(both, bins=bins)
    return edges, np.histogram(healthy, edges)[0], np.histogram(pathology, edges)[0]


def write_score_histogram(path, healthy_scores, pathology_scores, bins=30):
    edges, healthy, pathology = score_histogram(healthy_scores, pathology_scores, bins)
    with open(path, 'w', encoding='utf-8') as f:
        f.write('bin_start\tbin_end\thealthy\tpathology\n')
        for i in range(len(healthy)):
            f.write('{!r}\t{!r}\t{}\t{}\n'.format(float(edges[i]), float(edges[i + 1]),
                                                  int(healthy[i]), int(pathology[i])))


def write_scores(path, records):
    """Write ``(path, label, dataset_tag, score[, posterior])`` records as TSV."""
    records = list(records)
    with_posterior = any(len(r) > 4 for r in records)
    fields = SCORE_FIELDS + (('posterior',) if with_posterior else ())
    with open(path, 'w', encoding='utf-8') as f:
        f.write('\t'.join(fields) + '\n')
        for r in records:
            values = [str(v) if not isinstance(v, float) else repr(v) for v in r]
            f.write('\t'.join(values) + '\n')


def read_scores(path):
    """Read a score file into a list of OrderedDicts with float scores."""
    try:
        with open(path, 'r', encoding='utf-8') as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise DataError('cannot read score file {}: {}'.format(path, e))
    if not lines or tuple(lines[0].split('\t')[:len(SCORE_FIELDS)]) != SCORE_FIELDS:
        raise DataError('{}: expected header {}'.format(path, '\t'.join(SCORE_FIELDS)))
    header = lines[0].split('\t')
    out = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cols = line.split('\t')
        if len(cols) != len(header):
            raise DataError('{} line {}: expected {} columns, got {}'.format(path, lineno, len(header), len(cols)))
        row = OrderedDict(zip(header, cols))
        try:
            row['score'] = float(row['score'])
            if 'posterior' in row:
                row['posterior'] = float(row['posterior'])
        except ValueError:
            raise DataError('{} line {}: bad score {!r}'.format(path, lineno, row['score']))
        out.append(row)
    return out

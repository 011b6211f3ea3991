# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

"""
Synthetic fundus-like corpus: a smooth orange disk with an optic disc and
vessel-like curves ("Normal"), optionally with bright lesion blobs and a
ground-truth lesion mask ("Anomalous").
"""

import math
import os

import numpy as np
from scipy import ndimage

from retinakit import imaging
from retinakit.data.manifest import HEALTHY_LABEL, Manifest, ManifestRecord


ANOMALOUS_LABEL = 'Anomalous'
SHAPES_CLASSES = (HEALTHY_LABEL, ANOMALOUS_LABEL)


def _grid(side):
    rows, cols = np.mgrid[0:side, 0:side].astype(np.float64)
    return rows, cols


def _render_background(rng, side):
    rows, cols = _grid(side)
    c = (side - 1) / 2.
    radius = side * rng.uniform(0.42, 0.47)
    r = np.hypot(rows - c, cols - c) / radius
    disk = ndimage.gaussian_filter((r <= 1).astype(np.float64), sigma=side / 64.)
    falloff = np.clip(1. - 0.35 * r ** 2, 0., 1.)
    tint = np.array([0.78, 0.36, 0.16]) * rng.uniform(0.9, 1.1)
    img = disk[:, :, None] * falloff[:, :, None] * tint[None, None, :]

    # optic disc
    angle = rng.uniform(0, 2 * math.pi)
    dist = radius * rng.uniform(0.3, 0.5)
    od = (c + dist * math.sin(angle), c + dist * math.cos(angle))
    od_radius = side * 0.07
    od_mask = np.exp(-0.5 * ((rows - od[0]) ** 2 + (cols - od[1]) ** 2) / (od_radius / 1.5) ** 2)
    img = img + od_mask[:, :, None] * np.array([0.2, 0.25, 0.12])[None, None, :]

    # vessels: sinusoidally perturbed rays leaving the optic disc
    vessels = np.zeros((side, side))
    for _ in range(rng.randint(4, 7)):
        theta = rng.uniform(0, 2 * math.pi)
        amp = rng.uniform(0.02, 0.06) * side
        freq = rng.uniform(1.0, 2.5)
        t = np.linspace(0, radius * 1.2, 4 * side)
        wobble = amp * np.sin(freq * 2 * math.pi * t / radius)
        ys = od[0] + t * math.sin(theta) + wobble * math.cos(theta)
        xs = od[1] + t * math.cos(theta) - wobble * math.sin(theta)
        ok = (ys >= 0) & (ys <= side - 1) & (xs >= 0) & (xs <= side - 1)
        vessels[np.round(ys[ok]).astype(int), np.round(xs[ok]).astype(int)] = 1.
    vessels = ndimage.gaussian_filter(vessels, sigma=max(side / 96., 0.5))
    vessels = vessels / max(vessels.max(), 1e-12)
    inside = (r <= 1).astype(np.float64)
    img = img * (1. - 0.5 * (vessels * inside)[:, :, None])
    return np.clip(img, 0., 1.), radius


def _render_lesions(rng, img, radius):
    side = img.shape[0]
    rows, cols = _grid(side)
    c = (side - 1) / 2.
    mask = np.zeros((side, side), dtype=bool)
    for _ in range(rng.randint(1, 4)):
        angle = rng.uniform(0, 2 * math.pi)
        dist = radius * math.sqrt(rng.uniform(0., 0.7))
        center = (c + dist * math.sin(angle), c + dist * math.cos(angle))
        sigma = side * rng.uniform(0.04, 0.08)
        blob = np.exp(-0.5 * ((rows - center[0]) ** 2 + (cols - center[1]) ** 2) / sigma ** 2)
        img = img + rng.uniform(0.5, 0.8) * blob[:, :, None] * np.array([1.0, 0.95, 0.6])[None, None, :]
        mask |= blob > 0.5
    return np.clip(img, 0., 1.), mask


def render_shape(seed, index, anomalous, side=64):
    """Render one synthetic image as an :class:`~retinakit.imaging.ImageSample`."""
    if side < 32:
        raise ValueError('side must be at least 32, got {}'.format(side))
    rng = np.random.RandomState([seed, int(anomalous), index])
    img, radius = _render_background(rng, side)
    mask = None
    if anomalous:
        img, mask = _render_lesions(rng, img, radius)
    else:
        mask = np.zeros((side, side), dtype=bool)
    label = ANOMALOUS_LABEL if anomalous else HEALTHY_LABEL
    return imaging.ImageSample(img, label=label, dataset_tag='shapes', lesion_mask=mask)


def render_shapes(n_healthy, n_anomalous, side=64, seed=0):
    """Healthy images first, then anomalous ones."""
    samples = [render_shape(seed, i, False, side) for i in range(n_healthy)]
    samples += [render_shape(seed, i, True, side) for i in range(n_anomalous)]
    return samples


def generate_shapes_dataset(out_dir, n_healthy, n_anomalous, side=64, seed=0, dataset_tag='shapes'):
    """Write the synthetic corpus as PNG files plus ``manifest.tsv`` (and
    lesion masks under ``masks/``) into *out_dir*; returns the manifest."""
    os.makedirs(out_dir, exist_ok=True)
    records = []
    for anomalous, count in ((False, n_healthy), (True, n_anomalous)):
        label = ANOMALOUS_LABEL if anomalous else HEALTHY_LABEL
        subdir = label.lower()
        os.makedirs(os.path.join(out_dir, subdir), exist_ok=True)
        if anomalous and count > 0:
            os.makedirs(os.path.join(out_dir, 'masks'), exist_ok=True)
        for i in range(count):
            sample = render_shape(seed, i, anomalous, side)
            rel = os.path.join(subdir, '{:05d}.png'.format(i))
            imaging.save_png(sample.pixels, os.path.join(out_dir, rel))
            if anomalous:
                imaging.save_png(sample.lesion_mask.astype(np.float64),
                                 os.path.join(out_dir, lesion_mask_path(rel)))
            records.append(ManifestRecord(rel, label, dataset_tag, True))
    classes = SHAPES_CLASSES if n_anomalous > 0 else (HEALTHY_LABEL,)
    manifest = Manifest(records, classes=classes, root=os.path.abspath(out_dir))
    manifest.save(os.path.join(out_dir, 'manifest.tsv'))
    return manifest


def lesion_mask_path(rel_path):
    """``anomalous/00003.png`` -> ``masks/00003.png``"""
    return os.path.join('masks', os.path.basename(rel_path))

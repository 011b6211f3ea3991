# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

"""
Image decode/encode, standardization and the staged augmentation and
enhancement operations.

All operations take and return :class:`ImageSample` (or its H x W x 3 pixel
array) with values in [0, 1] and never mutate their input.
"""

import math

import numpy as np
from PIL import Image
from scipy import ndimage

from retinakit.data.data_utils import DataError


class ImageSample(object):
    """Decoded image plus its label, dataset of origin and quality flag."""

    def __init__(self, pixels, label=None, dataset_tag='', quality_ok=True, path=None,
                 lesion_mask=None):
        pixels = np.asarray(pixels)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise ValueError('expected H x W x 3 pixels, got {}'.format(pixels.shape))
        if pixels.size and (pixels.min() < 0 or pixels.max() > 1):
            raise ValueError('pixel values must lie in [0, 1]')
        self.pixels = pixels
        self.label = label
        self.dataset_tag = dataset_tag
        self.quality_ok = quality_ok
        self.path = path
        self.lesion_mask = lesion_mask

    @property
    def side(self):
        return self.pixels.shape[0]

    def replace(self, pixels, lesion_mask=None):
        return ImageSample(
            pixels, label=self.label, dataset_tag=self.dataset_tag,
            quality_ok=self.quality_ok, path=self.path,
            lesion_mask=lesion_mask if lesion_mask is not None else self.lesion_mask,
        )

    def __repr__(self):
        return 'ImageSample(path={}, label={}, dataset_tag={}, side={})'.format(
            self.path, self.label, self.dataset_tag, self.side)


def _pixels(img):
    return img.pixels if isinstance(img, ImageSample) else np.asarray(img, dtype=np.float64)


def _wrap(img, pixels):
    return img.replace(pixels) if isinstance(img, ImageSample) else pixels


# decode / encode

def center_crop_box(width, height):
    """(left, top, right, bottom) of the centered square on the shorter side."""
    side = min(width, height)
    left = (width - side) // 2
    top = (height - side) // 2
    return left, top, left + side, top + side


def resize_bilinear(pixels, side):
    """Per-channel bilinear resize of an H x W x C float image."""
    if pixels.shape[0] == side and pixels.shape[1] == side:
        return pixels.copy()
    channels = []
    for c in range(pixels.shape[2]):
        channel = Image.fromarray(np.ascontiguousarray(pixels[:, :, c], dtype=np.float32))
        channels.append(np.asarray(channel.resize((side, side), Image.BILINEAR), dtype=np.float64))
    return np.clip(np.stack(channels, axis=2), 0., 1.)


def load_and_standardize(path, side=224, label=None, dataset_tag='', quality_ok=True):
    """Decode *path*, crop the centered square of the shorter side, resize it
    bilinearly to ``side x side`` and map the values to [0, 1]."""
    try:
        with Image.open(path) as img:
            img.load()
            mode = img.mode
            if mode != 'RGB':
                raise DataError('{} is not an RGB image (mode {})'.format(path, mode))
            img = img.crop(center_crop_box(*img.size))
            pixels = np.asarray(img, dtype=np.float64) / 255.
    except DataError:
        raise
    except (OSError, ValueError) as e:
        raise DataError('cannot read image {}: {}'.format(path, e))
    pixels = resize_bilinear(pixels, side)
    return ImageSample(pixels, label=label, dataset_tag=dataset_tag, quality_ok=quality_ok, path=path)


def to_uint8(pixels):
    return np.round(np.clip(pixels, 0., 1.) * 255.).astype(np.uint8)


def save_png(pixels, path):
    """Write an H x W x 3 (RGB) or H x W (grayscale) [0, 1] image as 8-bit PNG."""
    pixels = _pixels(pixels)
    Image.fromarray(to_uint8(pixels)).save(path, format='PNG')


# geometric augmentation

def rotation_matrix(angle):
    """Maps output (row, col) offsets from the center to input offsets for a
    counter-clockwise rotation of the content by *angle* degrees."""
    theta = math.radians(angle)
    m = np.array([
        [math.cos(theta), math.sin(theta)],
        [-math.sin(theta), math.cos(theta)],
    ])
    m[np.abs(m) < 1e-12] = 0.
    return m


def apply_geometric(img, angle=0., translation=(0., 0.), flip=False, order=1):
    """Horizontal flip, then rotation about the center and translation by
    (rows, cols) pixels. Uncovered regions are filled with 0.

    *order* 1 is bilinear, 0 nearest-neighbor.
    """
    pixels = _pixels(img)
    if flip:
        pixels = pixels[:, ::-1]
    h, w = pixels.shape[:2]
    center = np.array([(h - 1) / 2., (w - 1) / 2.])
    shift = np.asarray(translation, dtype=np.float64)
    matrix = rotation_matrix(angle)
    offset = center - matrix.dot(center + shift)
    out = np.empty(pixels.shape, dtype=np.float64)
    for c in range(pixels.shape[2]):
        out[:, :, c] = ndimage.affine_transform(
            pixels[:, :, c], matrix, offset=offset, order=order, mode='constant', cval=0.,
        )
    out = np.clip(out, 0., 1.)
    if isinstance(img, ImageSample):
        mask = img.lesion_mask
        if mask is not None:
            mask = mask[:, ::-1] if flip else mask
            mask = ndimage.affine_transform(
                mask.astype(np.float64), matrix, offset=offset, order=0, mode='constant', cval=0.,
            ) > 0.5
        return img.replace(out, lesion_mask=mask)
    return out


def sample_geometric(rng, side, policy):
    flip = bool(rng.uniform() < 0.5)
    angle = rng.uniform(*policy.rotation_range)
    frac = policy.translation_frac
    dy, dx = rng.uniform(-frac, frac, size=2) * side
    return {'flip': flip, 'angle': angle, 'translation': (dy, dx)}


def augment_geometric(img, rng, policy=None):
    """Random horizontal flip (p=0.5), rotation and translation."""
    policy = policy or AugmentationPolicy('geometric')
    params = sample_geometric(rng, _pixels(img).shape[0], policy)
    return apply_geometric(img, order=policy.interpolation_order, **params)


# color augmentation

def apply_color(img, brightness=1., contrast=1., sigma=0.):
    """Multiplicative brightness, contrast about the image mean, then a
    Gaussian blur of standard deviation *sigma*; clamped to [0, 1]."""
    pixels = _pixels(img)
    out = pixels
    if brightness != 1.:
        out = out * brightness
    if contrast != 1.:
        mean = out.mean()
        out = (out - mean) * contrast + mean
    out = np.clip(out, 0., 1.)
    if sigma > 0:
        out = ndimage.gaussian_filter(out, sigma=(sigma, sigma, 0), mode='nearest')
        out = np.clip(out, 0., 1.)
    if out is pixels:
        out = pixels.copy()
    return _wrap(img, out)


def sample_color(rng, policy):
    return {
        'brightness': rng.uniform(*policy.brightness),
        'contrast': rng.uniform(*policy.contrast),
        'sigma': rng.uniform(*policy.blur_sigma),
    }


def augment_color(img, rng, policy=None):
    """Random brightness/contrast jitter followed by a random Gaussian blur."""
    policy = policy or AugmentationPolicy('color')
    return apply_color(img, **sample_color(rng, policy))


# enhancement

def hist_equalize(img, bins=256):
    """Per-channel remap through the empirical CDF over *bins* bins."""
    pixels = _pixels(img)
    out = np.empty(pixels.shape, dtype=np.float64)
    for c in range(pixels.shape[2]):
        channel = pixels[:, :, c]
        idx = np.clip(np.floor(channel * bins), 0, bins - 1).astype(np.int64)
        cdf = np.cumsum(np.bincount(idx.ravel(), minlength=bins)) / float(idx.size)
        out[:, :, c] = cdf[idx]
    return _wrap(img, out)


def laplace_enhance(img, strength=1.0):
    """``img - strength * laplacian(img)`` with the 4-neighbor kernel and
    replicated borders, clamped to [0, 1]."""
    pixels = _pixels(img)
    if strength == 0:
        return _wrap(img, pixels.copy())
    out = np.empty(pixels.shape, dtype=np.float64)
    for c in range(pixels.shape[2]):
        out[:, :, c] = pixels[:, :, c] - strength * ndimage.laplace(pixels[:, :, c], mode='nearest')
    return _wrap(img, np.clip(out, 0., 1.))


def ks_distance_to_uniform(values):
    """Kolmogorov-Smirnov distance between the empirical CDF of *values* and U[0, 1]."""
    x = np.sort(np.ravel(values))
    n = len(x)
    upper = np.arange(1, n + 1) / n - x
    lower = x - np.arange(0, n) / n
    return float(max(upper.max(), lower.max()))


# policy

STAGES = ('none', 'geometric', 'color', 'hist_eq', 'laplace')


class AugmentationPolicy(object):
    """One of the cumulative augmentation setups.

    ``none`` < ``geometric`` < ``color`` (geometric + color); ``hist_eq`` and
    ``laplace`` each add their enhancement on top of ``color``. Enhancements
    are deterministic and also applied to evaluation images.
    """

    def __init__(self, stage='none', seed=0, translation_frac=0.10, rotation_range=(0., 360.),
                 brightness=(0.8, 1.2), contrast=(0.8, 1.2), blur_sigma=(0., 1.5),
                 laplace_strength=1.0, interpolation='bilinear'):
        if stage not in STAGES:
            raise ValueError('unknown augmentation stage {} (choose from {})'.format(stage, STAGES))
        if not 0. <= translation_frac <= 1.:
            raise ValueError('translation_frac must lie in [0, 1], got {}'.format(translation_frac))
        if interpolation not in ('bilinear', 'nearest'):
            raise ValueError('unknown interpolation {}'.format(interpolation))
        self.stage = stage
        self.seed = seed
        self.translation_frac = translation_frac
        self.rotation_range = tuple(rotation_range)
        self.brightness = tuple(brightness)
        self.contrast = tuple(contrast)
        self.blur_sigma = tuple(blur_sigma)
        self.laplace_strength = laplace_strength
        self.interpolation = interpolation

    @classmethod
    def from_args(cls, args):
        return cls(
            stage=args.augment,
            seed=args.seed,
            translation_frac=args.translation_frac,
            blur_sigma=(0., args.max_blur_sigma),
            brightness=(1. - args.jitter, 1. + args.jitter),
            contrast=(1. - args.jitter, 1. + args.jitter),
            laplace_strength=args.laplace_strength,
            interpolation=args.interpolation,
        )

    @property
    def interpolation_order(self):
        return 1 if self.interpolation == 'bilinear' else 0

    @property
    def geometric(self):
        return self.stage != 'none'

    @property
    def color(self):
        return self.stage in ('color', 'hist_eq', 'laplace')

    def rng(self, *stream):
        """Independent generator for one (epoch, sample index, ...) stream."""
        return np.random.RandomState([self.seed] + [int(s) for s in stream])

    def enhance(self, img):
        if self.stage == 'hist_eq':
            return hist_equalize(img)
        if self.stage == 'laplace':
            return laplace_enhance(img, self.laplace_strength)
        return img

    def __call__(self, img, rng=None, train=True):
        if train and rng is None:
            raise ValueError('training-time augmentation needs a random generator')
        if train and self.geometric:
            img = augment_geometric(img, rng, self)
        if train and self.color:
            img = augment_color(img, rng, self)
        return self.enhance(img)

    def __repr__(self):
        return 'AugmentationPolicy(stage={}, seed={})'.format(self.stage, self.seed)


def preview_panel(img, seed=0, policy_kwargs=None):
    """Side-by-side strip of one image under every augmentation stage."""
    tiles = []
    for stage in STAGES:
        policy = AugmentationPolicy(stage, seed=seed, **(policy_kwargs or {}))
        out = policy(img, rng=policy.rng(0, 0), train=stage != 'none')
        tiles.append(_pixels(out))
    return np.concatenate(tiles, axis=1)

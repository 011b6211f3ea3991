# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

import os
import tempfile
import unittest

import numpy as np
from PIL import Image

from retinakit import imaging
from retinakit.data import DataError

from tests.utils import constant_image, slow_test, write_image


def _disk(side, radius):
    rows, cols = np.mgrid[0:side, 0:side]
    c = (side - 1) / 2.
    inside = np.hypot(rows - c, cols - c) <= radius
    return np.repeat(inside[:, :, None], 3, axis=2).astype(np.float64) * 0.8


class TestStandardize(unittest.TestCase):

    def test_constant_image_resize(self):
        with tempfile.TemporaryDirectory('test_imaging') as d:
            path = write_image(os.path.join(d, 'c.png'), constant_image(448, 77 / 255.))
            sample = imaging.load_and_standardize(path, side=224)
        self.assertEqual(sample.pixels.shape, (224, 224, 3))
        np.testing.assert_allclose(sample.pixels, 77 / 255., atol=1e-6)

    def test_center_crop_box(self):
        self.assertEqual(imaging.center_crop_box(300, 200), (50, 0, 250, 200))
        self.assertEqual(imaging.center_crop_box(200, 300), (0, 50, 200, 250))

    def test_crop_keeps_center(self):
        img = np.zeros((200, 300, 3))
        img[:, 50:250] = 1.
        with tempfile.TemporaryDirectory('test_imaging') as d:
            path = write_image(os.path.join(d, 'wide.png'), img)
            sample = imaging.load_and_standardize(path, side=200)
        np.testing.assert_array_equal(sample.pixels, 1.)

    def test_checkerboard_mean(self):
        rows, cols = np.mgrid[0:448, 0:448]
        board = ((rows + cols) % 2).astype(np.float64)
        out = imaging.resize_bilinear(np.repeat(board[:, :, None], 3, axis=2), 224)
        self.assertLess(abs(out.mean() - 0.5), 1e-3)

    def test_rejects_grayscale_and_garbage(self):
        with tempfile.TemporaryDirectory('test_imaging') as d:
            gray = os.path.join(d, 'gray.png')
            Image.fromarray(np.zeros((8, 8), dtype=np.uint8)).save(gray)
            with self.assertRaises(DataError):
                imaging.load_and_standardize(gray, side=8)
            junk = os.path.join(d, 'junk.png')
            with open(junk, 'wb') as f:
                f.write(b'not an image')
            with self.assertRaises(DataError):
                imaging.load_and_standardize(junk, side=8)
            with self.assertRaises(DataError):
                imaging.load_and_standardize(os.path.join(d, 'missing.png'), side=8)

    def test_sample_range_checked(self):
        with self.assertRaises(ValueError):
            imaging.ImageSample(np.full((2, 2, 3), 1.5))
        with self.assertRaises(ValueError):
            imaging.ImageSample(np.zeros((2, 2)))


class TestGeometric(unittest.TestCase):

    def test_identity(self):
        img = np.random.RandomState(0).uniform(size=(16, 16, 3))
        np.testing.assert_array_equal(imaging.apply_geometric(img), img)

    def test_half_turn_of_centered_disk(self):
        disk = _disk(33, 10)
        out = imaging.apply_geometric(disk, angle=180.)
        self.assertLess(np.abs(out - disk).max(), 1e-2)

    def test_quarter_turn_nearest(self):
        img = np.zeros((2, 2, 3))
        img[:, :, 0] = [[0.1, 0.2], [0.3, 0.4]]
        out = imaging.apply_geometric(img, angle=90., order=0)
        np.testing.assert_allclose(out[:, :, 0], [[0.2, 0.4], [0.1, 0.3]])

    def test_flip(self):
        img = np.random.RandomState(1).uniform(size=(4, 6, 3))
        np.testing.assert_array_equal(imaging.apply_geometric(img, flip=True), img[:, ::-1])

    def test_translation_fills_zero(self):
        img = np.ones((8, 8, 3))
        out = imaging.apply_geometric(img, translation=(0., 2.))
        np.testing.assert_array_equal(out[:, :2], 0.)
        np.testing.assert_array_equal(out[:, 2:], 1.)

    def test_lesion_mask_follows_pixels(self):
        mask = np.zeros((8, 8), dtype=bool)
        mask[0, 0] = True
        sample = imaging.ImageSample(np.zeros((8, 8, 3)), lesion_mask=mask)
        out = imaging.apply_geometric(sample, flip=True)
        self.assertTrue(out.lesion_mask[0, 7])
        self.assertEqual(out.lesion_mask.sum(), 1)

    def test_augment_is_reproducible(self):
        img = np.random.RandomState(2).uniform(size=(16, 16, 3))
        a = imaging.augment_geometric(img, np.random.RandomState(5))
        b = imaging.augment_geometric(img, np.random.RandomState(5))
        np.testing.assert_array_equal(a, b)


class TestColor(unittest.TestCase):

    def test_identity(self):
        img = np.random.RandomState(0).uniform(size=(8, 8, 3))
        np.testing.assert_array_equal(imaging.apply_color(img), img)

    def test_constant_image_under_blur(self):
        img = constant_image(16, 0.4)
        np.testing.assert_allclose(imaging.apply_color(img, sigma=1.3), img, atol=1e-12)

    def test_blur_of_impulse(self):
        img = np.zeros((33, 33, 3))
        img[16, 16] = 1.
        out = imaging.apply_color(img, sigma=2.)
        x = np.arange(-8, 9)
        kernel = np.exp(-x ** 2 / 8.)
        peak = (1. / kernel.sum()) ** 2
        np.testing.assert_allclose(out[16, 16], peak, rtol=1e-9)

    def test_brightness_clamps(self):
        out = imaging.apply_color(constant_image(4, 0.9), brightness=2.)
        np.testing.assert_array_equal(out, 1.)

    def test_contrast_about_mean(self):
        img = np.zeros((2, 2, 3))
        img[0] = 0.25
        img[1] = 0.75
        out = imaging.apply_color(img, contrast=0.5)
        np.testing.assert_allclose(out[0], 0.375)
        np.testing.assert_allclose(out[1], 0.625)


class TestEnhance(unittest.TestCase):

    def test_hist_equalize_uniform_fixed_point(self):
        values = (np.arange(256) + 0.5) / 256.
        img = np.repeat(values.reshape(16, 16, 1), 3, axis=2)
        out = imaging.hist_equalize(img)
        self.assertLessEqual(np.abs(out - img).max(), 1 / 256.)

    def test_hist_equalize_two_values(self):
        img = np.full((4, 4, 3), 0.8)
        img[0] = 0.2
        out = imaging.hist_equalize(img)
        np.testing.assert_allclose(out[0], 0.25, atol=1 / 256.)
        np.testing.assert_allclose(out[1:], 1.0, atol=1 / 256.)

    def test_hist_equalize_flattens_histogram(self):
        img = np.random.RandomState(0).beta(2, 5, size=(64, 64, 3))
        before = imaging.ks_distance_to_uniform(img[:, :, 0])
        after = imaging.ks_distance_to_uniform(imaging.hist_equalize(img)[:, :, 0])
        self.assertLess(after, before)
        self.assertLess(after, 0.02)

    def test_laplace_constant_and_zero_strength(self):
        img = constant_image(8, 0.3)
        np.testing.assert_allclose(imaging.laplace_enhance(img), img, atol=1e-12)
        noisy = np.random.RandomState(0).uniform(size=(8, 8, 3))
        np.testing.assert_array_equal(imaging.laplace_enhance(noisy, strength=0), noisy)

    def test_laplace_linear_ramp_interior(self):
        ramp = 0.25 + 0.5 * np.arange(12) / 11.
        img = np.repeat(np.tile(ramp, (12, 1))[:, :, None], 3, axis=2)
        out = imaging.laplace_enhance(img, strength=0.7)
        np.testing.assert_allclose(out[1:-1, 1:-1], img[1:-1, 1:-1], atol=1e-12)


class TestPolicy(unittest.TestCase):

    def test_stages_are_cumulative(self):
        policies = {s: imaging.AugmentationPolicy(s) for s in imaging.STAGES}
        self.assertFalse(policies['none'].geometric)
        self.assertTrue(policies['geometric'].geometric)
        self.assertFalse(policies['geometric'].color)
        for stage in ('color', 'hist_eq', 'laplace'):
            self.assertTrue(policies[stage].geometric and policies[stage].color)

    def test_bad_policy(self):
        with self.assertRaises(ValueError):
            imaging.AugmentationPolicy('sharpen')
        with self.assertRaises(ValueError):
            imaging.AugmentationPolicy('geometric', translation_frac=1.5)

    def test_train_needs_rng(self):
        with self.assertRaises(ValueError):
            imaging.AugmentationPolicy('geometric')(constant_image(4, 0.5), train=True)

    def test_eval_applies_enhancement_only(self):
        img = np.random.RandomState(0).uniform(size=(8, 8, 3))
        policy = imaging.AugmentationPolicy('hist_eq')
        np.testing.assert_array_equal(policy(img, train=False), imaging.hist_equalize(img))
        np.testing.assert_array_equal(imaging.AugmentationPolicy('color')(img, train=False), img)

    def test_streams_are_independent_of_call_order(self):
        img = np.random.RandomState(0).uniform(size=(16, 16, 3))
        policy = imaging.AugmentationPolicy('color', seed=4)
        first = policy(img, rng=policy.rng(1, 3))
        policy(img, rng=policy.rng(1, 2))
        np.testing.assert_array_equal(policy(img, rng=policy.rng(1, 3)), first)

    def test_preview_panel(self):
        panel = imaging.preview_panel(constant_image(16, 0.5), seed=0)
        self.assertEqual(panel.shape, (16, 16 * len(imaging.STAGES), 3))
        np.testing.assert_array_equal(panel[:, :16], 0.5)

class TestAugmentationTrials(unittest.TestCase):

    def _run_trials(self, n, seed=0):
        rng = np.random.RandomState(seed)
        for trial in range(n):
            side = rng.randint(4, 25)
            stage = imaging.STAGES[rng.randint(len(imaging.STAGES))]
            policy = imaging.AugmentationPolicy(
                stage, seed=rng.randint(1000), translation_frac=rng.uniform(0., 0.5),
                laplace_strength=rng.uniform(0., 3.),
                interpolation='nearest' if rng.uniform() < 0.3 else 'bilinear',
            )
            pixels = rng.uniform(size=(side, side, 3))
            if rng.uniform() < 0.2:
                # saturated pixels stress the clamps
                pixels = np.round(pixels)
            mask = rng.uniform(size=(side, side)) < 0.3
            sample = imaging.ImageSample(pixels, label='Normal', lesion_mask=mask)
            stream = (rng.randint(100), rng.randint(1000))

            out = policy(sample, rng=policy.rng(*stream))
            self.assertEqual(out.pixels.shape, pixels.shape, msg=(trial, stage))
            self.assertEqual(out.lesion_mask.shape, mask.shape)
            self.assertTrue(np.isfinite(out.pixels).all())
            self.assertGreaterEqual(out.pixels.min(), 0.)
            self.assertLessEqual(out.pixels.max(), 1.)
            self.assertEqual(out.label, 'Normal')
            again = policy(sample, rng=policy.rng(*stream))
            np.testing.assert_array_equal(again.pixels, out.pixels)
            np.testing.assert_array_equal(again.lesion_mask, out.lesion_mask)
            np.testing.assert_array_equal(sample.pixels, pixels)

    def test_trials(self):
        self._run_trials(200)

    @slow_test
    def test_many_trials(self):
        self._run_trials(10000, seed=1)

    def test_hist_equalize_is_monotone(self):
        rng = np.random.RandomState(0)
        for _ in range(50):
            pixels = rng.beta(rng.uniform(0.2, 5.), rng.uniform(0.2, 5.), size=(12, 12, 3))
            out = imaging.hist_equalize(pixels)
            for c in range(3):
                order = np.argsort(pixels[:, :, c], axis=None, kind='stable')
                self.assertTrue((np.diff(out[:, :, c].ravel()[order]) >= 0).all())

    def test_constant_images_are_fixed_points(self):
        rng = np.random.RandomState(0)
        for _ in range(50):
            value = rng.uniform()
            img = constant_image(rng.randint(3, 17), value)
            np.testing.assert_allclose(imaging.apply_color(img, sigma=rng.uniform(0.1, 3.)), img, atol=1e-12)
            np.testing.assert_array_equal(imaging.laplace_enhance(img, rng.uniform(0., 5.)), img)



if __name__ == '__main__':
    unittest.main()

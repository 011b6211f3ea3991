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

from retinakit.autograd import ShapeError, Tensor, default_dtype, functional as F, max_relative_error
from retinakit.criterions.constrained_attention import composite_loss
from retinakit.data import numpy_seed
from retinakit.models.mask_unet import (
    MaskOutput,
    MaskUNet,
    apply_mask,
    export_mask_png,
    mask_forward,
    stage_channels,
)
from retinakit.models.masked_vit import MaskedViT
from retinakit.models.vit import ViTClassifier, ViTConfig

from tests.utils import randn


def tiny_masked_vit():
    with numpy_seed(0):
        classifier = ViTClassifier(ViTConfig(image_side=8, patch_size=4, embed_dim=4, depth=1, heads=2,
                                             mlp_ratio=2, n_classes=2))
        return MaskedViT(MaskUNet(image_side=8), classifier)


class TestMaskUNet(unittest.TestCase):

    def test_stage_table(self):
        self.assertEqual(stage_channels(), [32, 32, 64, 128, 128, 128, 128, 64, 32, 32, 1])

    def test_forward(self):
        net = MaskUNet(image_side=8)
        out = mask_forward(net, np.random.RandomState(0).uniform(size=(2, 3, 8, 8)))
        self.assertEqual(out.mask.shape, (2, 1, 8, 8))
        self.assertEqual(out.stage_channels, stage_channels())
        m = out.mask.data
        self.assertTrue(((m > 0) & (m < 1)).all())
        self.assertAlmostEqual(out.l1.item(), m.sum(axis=(1, 2, 3)).mean(), places=4)
        self.assertEqual(out.num_pixels, 64)
        self.assertEqual(out.numpy().shape, (2, 8, 8))

    def test_geometry_checks(self):
        with self.assertRaises(ShapeError):
            MaskUNet(image_side=12)
        with self.assertRaises(ShapeError):
            mask_forward(MaskUNet(image_side=8), np.zeros((1, 3, 16, 16)))

    def test_export_png(self):
        mask = np.zeros((2, 1, 8, 8))
        mask[0, 0, :, :4] = 1.
        with tempfile.TemporaryDirectory('test_mask_unet') as d:
            path = os.path.join(d, 'mask.png')
            export_mask_png(mask, path)
            with Image.open(path) as img:
                self.assertEqual(img.mode, 'L')
                pixels = np.asarray(img)
        self.assertEqual(pixels.shape, (8, 8))
        self.assertTrue((pixels[:, :4] == 255).all() and (pixels[:, 4:] == 0).all())


class TestApplyMask(unittest.TestCase):

    def setUp(self):
        self.x = np.random.RandomState(0).uniform(size=(2, 3, 4, 4)).astype(np.float32)

    def test_ones_and_zeros(self):
        np.testing.assert_array_equal(apply_mask(np.ones((4, 4)), self.x).data, self.x)
        np.testing.assert_array_equal(apply_mask(np.zeros((2, 1, 4, 4)), self.x).data, 0.)

    def test_half_mask(self):
        mask = np.zeros((2, 4, 4))
        mask[:, :, :2] = 1.
        out = apply_mask(mask, self.x).data
        np.testing.assert_array_equal(out[..., :2], self.x[..., :2])
        np.testing.assert_array_equal(out[..., 2:], 0.)

    def test_mask_output_accepted(self):
        mask = Tensor(np.full((2, 1, 4, 4), 0.5), dtype=np.float64)
        out = apply_mask(MaskOutput(mask, F.sum(mask)), self.x)
        np.testing.assert_allclose(out.data, 0.5 * self.x)

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeError):
            apply_mask(np.ones((3, 3)), self.x)
        with self.assertRaises(ShapeError):
            apply_mask(np.ones((3, 1, 4, 4)), self.x)
        with self.assertRaises(ShapeError):
            apply_mask(np.ones((2, 2, 4, 4)), self.x)


class TestCompositeLoss(unittest.TestCase):

    def test_lambda_zero_is_cross_entropy(self):
        model = tiny_masked_vit()
        x = np.random.RandomState(1).uniform(size=(2, 3, 8, 8))
        target = np.array([0, 1])
        logits, mask_out = model(x)
        total, ce, _ = composite_loss(logits, mask_out, target, 0.)
        self.assertEqual(total.item(), ce.item())
        plain = F.cross_entropy(model.classifier(apply_mask(mask_out.mask, x)), target)
        self.assertAlmostEqual(total.item(), plain.item(), places=5)

    def test_lambda_slope_is_mask_l1(self):
        with default_dtype(np.float64):
            model = tiny_masked_vit()
            logits, mask_out = model(np.random.RandomState(2).uniform(size=(2, 3, 8, 8)))
            target = np.array([1, 0])
            low, _, l1 = composite_loss(logits, mask_out, target, 0.1)
            high, _, _ = composite_loss(logits, mask_out, target, 0.3)
            self.assertAlmostEqual((high.item() - low.item()) / 0.2, l1.item(), places=8)
            self.assertAlmostEqual(l1.item(), mask_out.mask.data.sum() / 2, places=8)

            _, _, normalized = composite_loss(logits, mask_out, target, 0.1, normalize_l1=True)
            self.assertAlmostEqual(normalized.item(), l1.item() / 64, places=10)

    def test_negative_lambda(self):
        model = tiny_masked_vit()
        logits, mask_out = model(np.zeros((1, 3, 8, 8)))
        with self.assertRaises(ValueError):
            composite_loss(logits, mask_out, np.array([0]), -1e-4)

    def test_mismatched_sides(self):
        classifier = ViTClassifier(ViTConfig(image_side=16, patch_size=4, embed_dim=4, depth=1, heads=2))
        with self.assertRaises(ValueError):
            MaskedViT(MaskUNet(image_side=8), classifier)

    def test_gradients_through_mask_and_classifier(self):
        with default_dtype(np.float64):
            model = tiny_masked_vit()
            x = randn(2, 3, 8, 8, seed=4)
            target = np.array([0, 1])

            def loss(*params):
                logits, mask_out = model(x)
                return composite_loss(logits, mask_out, target, 0.05)[0]

            mask_params = list(model.mask_net.parameters())
            err = max_relative_error(loss, mask_params, num_checks=40, seed=1)
            self.assertLess(err, 1e-4)
            err = max_relative_error(loss, list(model.classifier.parameters()), num_checks=30, seed=2)
            self.assertLess(err, 1e-4)


if __name__ == '__main__':
    unittest.main()

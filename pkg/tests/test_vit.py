# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

import unittest

import numpy as np

from retinakit.autograd import ShapeError, Tensor, default_dtype, functional as F, max_relative_error
from retinakit.data import numpy_seed
from retinakit.models.vit import B16, TOY, ViTClassifier, ViTConfig, num_parameters, patchify, unpatchify

from tests.utils import randn


def tiny_config(**kwargs):
    cfg = dict(image_side=8, patch_size=4, embed_dim=4, depth=1, heads=2, mlp_ratio=2, n_classes=2)
    cfg.update(kwargs)
    return ViTConfig(**cfg)


class TestPatches(unittest.TestCase):

    def test_single_patch(self):
        x = np.random.RandomState(0).randn(2, 3, 4, 4)
        tokens = patchify(x, 4)
        self.assertEqual(tokens.shape, (2, 1, 48))
        np.testing.assert_array_equal(tokens[:, 0], x.reshape(2, -1))

    def test_row_major_order(self):
        x = np.arange(16.).reshape(1, 1, 4, 4)
        tokens = patchify(x, 2)
        np.testing.assert_array_equal(tokens[0], [
            [0, 1, 4, 5],
            [2, 3, 6, 7],
            [8, 9, 12, 13],
            [10, 11, 14, 15],
        ])

    def test_tensor_and_array_agree(self):
        x = np.random.RandomState(1).randn(2, 3, 8, 8)
        np.testing.assert_array_equal(patchify(Tensor(x, dtype=np.float64), 4).data, patchify(x, 4))
        np.testing.assert_array_equal(unpatchify(patchify(x, 4), 4), x)

    def test_bad_geometry(self):
        with self.assertRaises(ShapeError):
            patchify(np.zeros((1, 3, 6, 6)), 4)
        with self.assertRaises(ShapeError):
            unpatchify(np.zeros((1, 3, 48)), 4)


class TestViT(unittest.TestCase):

    def test_parameter_counts(self):
        self.assertEqual(num_parameters(ViTConfig(n_classes=7, **B16)), 85804039)
        for cfg in (tiny_config(), ViTConfig(n_classes=3, **TOY)):
            self.assertEqual(num_parameters(cfg), ViTClassifier(cfg).num_parameters())

    def test_config_validation(self):
        with self.assertRaises(ShapeError):
            ViTConfig(image_side=30, patch_size=8)
        with self.assertRaises(ShapeError):
            ViTConfig(embed_dim=10, heads=4)
        with self.assertRaises(ValueError):
            ViTConfig(n_classes=0)

    def test_zeros_input_is_deterministic(self):
        logits = []
        for _ in range(2):
            with numpy_seed(1):
                model = ViTClassifier(ViTConfig(n_classes=2, **TOY))
            logits.append(model(np.zeros((1, 3, 64, 64))).data)
        self.assertTrue(np.isfinite(logits[0]).all())
        self.assertEqual(logits[0].shape, (1, 2))
        np.testing.assert_array_equal(logits[0], logits[1])

    def test_batch_equivariance(self):
        with default_dtype(np.float64):
            model = ViTClassifier(tiny_config(n_classes=3))
            x = np.random.RandomState(2).uniform(size=(3, 3, 8, 8))
            batched = model(x).data
            single = np.concatenate([model(x[i:i + 1]).data for i in range(3)])
        np.testing.assert_allclose(batched, single, atol=1e-12)

    def test_inner_states(self):
        model = ViTClassifier(tiny_config(depth=3))
        logits, states = model(np.zeros((2, 3, 8, 8)), return_inner_states=True)
        self.assertEqual(logits.shape, (2, 2))
        self.assertEqual(len(states), 4)
        self.assertEqual(states[-1].shape, (2, 5, 4))
        np.testing.assert_array_equal(model.layers[0](states[0]).data, states[1].data)

    def test_wrong_input_shape(self):
        model = ViTClassifier(tiny_config())
        with self.assertRaises(ShapeError):
            model(np.zeros((1, 3, 16, 16)))
        with self.assertRaises(ShapeError):
            model(np.zeros((1, 1, 8, 8)))

    def test_gradients_of_all_parameters(self):
        with default_dtype(np.float64):
            with numpy_seed(0):
                model = ViTClassifier(tiny_config())
            x = randn(2, 3, 8, 8, seed=3)
            target = np.array([0, 1])
            params = list(model.parameters())
            err = max_relative_error(lambda *p: F.cross_entropy(model(x), target), params, num_checks=60)
        self.assertLess(err, 1e-4)

    def test_learns_a_separable_toy(self):
        from retinakit.optim.adam import AdamState, adam_step
        with default_dtype(np.float64):
            with numpy_seed(0):
                model = ViTClassifier(tiny_config())
            rng = np.random.RandomState(0)
            x = rng.uniform(0, 0.5, size=(8, 3, 8, 8))
            target = np.array([0, 1] * 4)
            x[target == 1, 0] += 0.5
            params = list(model.parameters())
            state = AdamState(params)
            losses = []
            for _ in range(60):
                model.zero_grad()
                loss = F.cross_entropy(model(x), target)
                loss.backward()
                adam_step(params, [p.grad for p in params], state, lr=1e-2)
                losses.append(loss.item())
        self.assertLess(losses[-1], 0.5 * losses[0])


if __name__ == '__main__':
    unittest.main()

# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

import io
import math
import unittest

import numpy as np

from retinakit.autograd import (
    DomainError,
    ShapeError,
    Tensor,
    default_dtype,
    functional as F,
    gradcheck,
    max_relative_error,
    no_grad,
    read_tensor,
    write_tensor,
    zeros_like,
)

from tests.utils import randn, torch_available


class TestTensor(unittest.TestCase):

    def test_add_zeros_is_identity(self):
        a = Tensor([[1., -2.], [3.5, 4.]])
        np.testing.assert_array_equal((a + zeros_like(a)).data, a.data)

    def test_sigmoid_at_zero(self):
        self.assertEqual(F.sigmoid(Tensor([0.])).item(), 0.5)

    def test_matmul_by_hand(self):
        out = F.matmul(Tensor([[1., 2.], [3., 4.]]), Tensor([[5.], [6.]]))
        np.testing.assert_array_equal(out.data, [[17.], [39.]])

    def test_matmul_identity(self):
        b = randn(3, 4, seed=1)
        out = F.matmul(Tensor(np.eye(3)), b)
        np.testing.assert_allclose(out.data, b.data)

    def test_matmul_inner_mismatch(self):
        with self.assertRaises(ShapeError):
            F.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))

    def test_broadcast_mismatch(self):
        with self.assertRaises(ShapeError):
            Tensor(np.ones((2, 3))) + Tensor(np.ones((4,)))

    def test_domain_errors(self):
        with self.assertRaises(DomainError):
            F.log(Tensor([1., -1.]))
        with self.assertRaises(DomainError):
            Tensor([1.]) / Tensor([0.])
        with self.assertRaises(DomainError):
            F.pow(Tensor([-2.]), 0.5)

    def test_backward_of_sum_is_ones(self):
        x = randn(2, 3, seed=2, requires_grad=True)
        x.sum().backward()
        np.testing.assert_array_equal(x.grad, np.ones((2, 3)))

    def test_backward_of_square(self):
        x = randn(4, seed=3, requires_grad=True)
        (x * x).sum().backward()
        np.testing.assert_allclose(x.grad, 2 * x.data)

    def test_gradient_accumulates_over_shared_nodes(self):
        x = randn(5, seed=4, requires_grad=True)
        (x * x + x).sum().backward()
        np.testing.assert_allclose(x.grad, 2 * x.data + 1)

    def test_broadcast_gradient_is_summed(self):
        a = randn(2, 3, seed=5, requires_grad=True)
        b = randn(3, seed=6, requires_grad=True)
        (a + b).sum().backward()
        np.testing.assert_array_equal(b.grad, [2., 2., 2.])

    def test_backward_needs_scalar(self):
        x = randn(3, seed=7, requires_grad=True)
        with self.assertRaises(ShapeError):
            (x * 2.).backward()

    def test_no_grad_records_nothing(self):
        x = randn(3, seed=8, requires_grad=True)
        with no_grad():
            y = x * 2.
        self.assertFalse(y.requires_grad)
        self.assertIsNone(y.grad_fn)

    def test_default_dtype_context(self):
        with default_dtype(np.float64):
            self.assertEqual(Tensor([1.]).dtype, np.float64)
        self.assertEqual(Tensor([1.]).dtype, np.float32)

    def test_tensor_serialization(self):
        a = np.arange(24, dtype=np.float64).reshape(2, 3, 4)
        buf = io.BytesIO()
        write_tensor(buf, a)
        buf.seek(0)
        b = read_tensor(buf)
        self.assertEqual(b.dtype, np.float64)
        np.testing.assert_array_equal(a, b)

    def test_tensor_serialization_rejects_garbage(self):
        with self.assertRaises(ValueError):
            read_tensor(io.BytesIO(b'XXXX\x01\x00\x00\x00\x00'))
        with self.assertRaises(ValueError):
            read_tensor(io.BytesIO(b'RTN'))


class TestFunctional(unittest.TestCase):

    def test_softmax_uniform(self):
        np.testing.assert_allclose(F.softmax(Tensor([0., 0., 0.])).data, [1 / 3.] * 3, rtol=1e-6)

    def test_softmax_saturates(self):
        out = F.softmax(Tensor([1000., 0.], dtype=np.float64)).data
        np.testing.assert_allclose(out, [1., 0.], atol=1e-9)

    def test_softmax_shift_invariant(self):
        x = randn(2, 5, seed=9)
        np.testing.assert_allclose(F.softmax(x).data, F.softmax(x + 17.5).data, atol=1e-7)

    def test_conv_identity_kernel(self):
        x = randn(1, 1, 4, 4, seed=10)
        out = F.conv2d(x, Tensor(np.ones((1, 1, 1, 1))))
        np.testing.assert_allclose(out.data, x.data)

    def test_conv_all_ones(self):
        out = F.conv2d(Tensor(np.ones((1, 1, 3, 3))), Tensor(np.ones((1, 1, 3, 3))), padding=1)
        self.assertEqual(out.shape, (1, 1, 3, 3))
        self.assertEqual(out.data[0, 0, 1, 1], 9.)
        self.assertEqual(out.data[0, 0, 0, 0], 4.)

    def test_conv_kernel_must_fit(self):
        with self.assertRaises(ShapeError):
            F.conv2d(Tensor(np.ones((1, 1, 2, 2))), Tensor(np.ones((1, 1, 5, 5))))

    def test_attention_single_step_is_value_projection(self):
        with default_dtype(np.float64):
            d = 4
            q, k, v = randn(1, 1, d, seed=11), randn(1, 1, d, seed=12), randn(1, 1, d, seed=13)
            w_in, b_in = randn(3 * d, d, seed=14), randn(3 * d, seed=15)
            w_out, b_out = randn(d, d, seed=16), randn(d, seed=17)
            out, weights = F.multi_head_attention(q, k, v, 2, w_in, b_in, w_out, b_out)
            expected = F.linear(F.linear(v, w_in[2 * d:], b_in[2 * d:]), w_out, b_out)
        np.testing.assert_allclose(out.data, expected.data, rtol=1e-10)
        np.testing.assert_allclose(weights.data, np.ones((1, 1, 1)))

    def test_attention_identical_keys_uniform(self):
        with default_dtype(np.float64):
            q = randn(1, 3, 4, seed=18)
            k = Tensor(np.tile(np.random.RandomState(19).randn(1, 1, 4), (1, 5, 1)))
            v = randn(1, 5, 4, seed=20)
            _, weights = F.multi_head_attention(q, k, v, 2, randn(12, 4, seed=21))
        np.testing.assert_allclose(weights.data, np.full((1, 3, 5), 0.2), rtol=1e-10)

    def test_layer_norm_of_constant_is_zero(self):
        out = F.normalize_layer(Tensor(np.full((2, 6), 3.)), 'layer_norm')
        np.testing.assert_allclose(out.data, 0., atol=1e-6)

    def test_adaptive_norm_endpoints(self):
        with default_dtype(np.float64):
            x = randn(3, 5, seed=22)
            ln = F.normalize_layer(x, 'layer_norm')
            np.testing.assert_allclose(F.normalize_layer(x, 'adaptive_norm', alpha=0.).data, x.data)
            np.testing.assert_allclose(F.normalize_layer(x, 'adaptive_norm', alpha=1.).data, ln.data)

    def test_cross_entropy_uniform_logits(self):
        loss = F.cross_entropy(Tensor(np.zeros((3, 7)), dtype=np.float64), np.array([0, 3, 6]))
        self.assertAlmostEqual(loss.item(), math.log(7), places=12)

    def test_cross_entropy_saturates(self):
        logits = np.zeros((1, 4))
        logits[0, 2] = 40.
        loss = F.cross_entropy(Tensor(logits, dtype=np.float64), np.array([2]))
        self.assertLess(loss.item(), 1e-6)

    def test_cross_entropy_gradient_is_softmax_minus_onehot(self):
        logits = randn(1, 4, seed=23, requires_grad=True, dtype=np.float64)
        F.cross_entropy(logits, np.array([1])).backward()
        expected = F.softmax(logits.detach()).data
        expected[0, 1] -= 1
        np.testing.assert_allclose(logits.grad, expected, rtol=1e-10)

    def test_cross_entropy_rejects_bad_label(self):
        with self.assertRaises(ValueError):
            F.cross_entropy(Tensor(np.zeros((1, 3))), np.array([3]))

    def test_binary_cross_entropy_at_half(self):
        loss = F.binary_cross_entropy_with_logits(Tensor(np.zeros(4), dtype=np.float64), 1)
        self.assertAlmostEqual(loss.item(), math.log(2), places=12)

    def test_elementwise_dispatch(self):
        a, b = Tensor([2.]), Tensor([3.])
        self.assertEqual(F.elementwise('mul', a, b).item(), 6.)
        with self.assertRaises(ValueError):
            F.elementwise('mul', a)
        with self.assertRaises(ValueError):
            F.elementwise('tanh', a)


class TestGradients(unittest.TestCase):
    """Analytic gradients against central finite differences at 64 bit."""

    def assertGradOK(self, fn, inputs, tol=1e-5):
        err = max_relative_error(fn, inputs)
        self.assertLess(err, tol)

    def test_sigmoid_at_one_point_three(self):
        x = Tensor([1.3], requires_grad=True, dtype=np.float64)
        self.assertTrue(gradcheck(F.sigmoid, [x], tol=1e-6))

    def test_elementwise_ops(self):
        unary = [F.exp, F.sigmoid, F.gelu, F.softplus, F.neg,
                 lambda a: F.log(a * a + 1.), lambda a: F.sqrt(a * a + 0.5)]
        for seed in range(5):
            for fn in unary:
                x = randn(3, 4, seed=seed, requires_grad=True, dtype=np.float64)
                self.assertGradOK(fn, [x])
            a = randn(3, 4, seed=seed + 100, requires_grad=True, dtype=np.float64)
            b = randn(4, seed=seed + 200, requires_grad=True, dtype=np.float64)
            self.assertGradOK(lambda a, b: a * b - a / (b * b + 1.), [a, b])

    def test_relu_and_abs_away_from_kink(self):
        x = Tensor([-1.5, -0.3, 0.4, 2.], requires_grad=True, dtype=np.float64)
        self.assertGradOK(F.relu, [x])
        self.assertGradOK(F.abs, [x])
        self.assertGradOK(lambda a: F.leaky_relu(a, 0.2), [x])

    def test_matmul(self):
        a = randn(3, 4, seed=24, requires_grad=True, dtype=np.float64)
        b = randn(4, 2, seed=25, requires_grad=True, dtype=np.float64)
        self.assertGradOK(lambda a, b: F.matmul(a, b).sum(), [a, b], tol=1e-6)

    def test_batched_matmul_broadcast(self):
        a = randn(2, 3, 4, seed=26, requires_grad=True, dtype=np.float64)
        b = randn(4, 5, seed=27, requires_grad=True, dtype=np.float64)
        self.assertGradOK(F.matmul, [a, b])

    def test_conv2d(self):
        x = randn(1, 2, 5, 5, seed=28, requires_grad=True, dtype=np.float64)
        w = randn(3, 2, 3, 3, seed=29, requires_grad=True, dtype=np.float64)
        self.assertGradOK(lambda x, w: F.conv2d(x, w, padding=1), [x, w])
        self.assertGradOK(lambda x, w: F.conv2d(x, w, stride=2), [x, w])

    def test_reductions_and_reshapes(self):
        x = randn(2, 3, 4, seed=30, requires_grad=True, dtype=np.float64)
        self.assertGradOK(lambda x: F.mean(x, axis=(0, 2)), [x])
        self.assertGradOK(lambda x: F.sum(x, axis=1, keepdims=True), [x])
        self.assertGradOK(lambda x: F.transpose(F.reshape(x, (6, 4)), (1, 0)), [x])
        self.assertGradOK(lambda x: x[:, 1:, ::2], [x])
        self.assertGradOK(lambda x: F.concat([x, x * 2.], axis=1), [x])
        self.assertGradOK(lambda x: F.upsample_nearest2d(F.reshape(x, (1, 2, 3, 4))), [x])

    def test_softmax_family(self):
        x = randn(3, 5, seed=31, requires_grad=True, dtype=np.float64)
        self.assertGradOK(F.softmax, [x])
        self.assertGradOK(F.log_softmax, [x])
        self.assertGradOK(lambda x: F.cross_entropy(x, np.array([0, 4, 2])), [x], tol=1e-6)

    def test_normalize_layer(self):
        x = randn(2, 6, seed=32, requires_grad=True, dtype=np.float64)
        w = randn(6, seed=33, requires_grad=True, dtype=np.float64)
        alpha = Tensor([0.3], requires_grad=True, dtype=np.float64)
        self.assertGradOK(lambda x, w: F.normalize_layer(x, weight=w), [x, w])
        self.assertGradOK(lambda x, a: F.normalize_layer(x, 'adaptive_norm', alpha=a), [x, alpha])

    def test_multi_head_attention(self):
        q = randn(1, 3, 4, seed=34, requires_grad=True, dtype=np.float64)
        w = randn(12, 4, seed=35, requires_grad=True, dtype=np.float64)
        w_out = randn(4, 4, seed=36, requires_grad=True, dtype=np.float64)

        def fn(q, w, w_out):
            return F.multi_head_attention(q, q, q, 2, w, out_proj_weight=w_out)[0]

        self.assertGradOK(fn, [q, w, w_out], tol=1e-4)

    def test_random_conv_classifier_graphs(self):
        for seed in range(20):
            rng = np.random.RandomState(seed)
            n, c, side, k = rng.randint(1, 3), rng.randint(1, 4), rng.randint(4, 7), rng.randint(2, 5)
            stride = 1 + seed % 2
            x = randn(n, c, side, side, seed=seed, requires_grad=True, dtype=np.float64)
            w = randn(k, c, 3, 3, seed=seed + 1000, requires_grad=True, dtype=np.float64)
            v = randn(k, 3, seed=seed + 2000, requires_grad=True, dtype=np.float64)
            target = rng.randint(0, 3, size=n)

            def fn(x, w, v):
                h = F.gelu(F.conv2d(x, w, stride=stride, padding=1))
                return F.cross_entropy(F.matmul(F.mean(h, axis=(2, 3)), v), target)

            self.assertGradOK(fn, [x, w, v], tol=1e-4)

    @unittest.skipUnless(torch_available(), 'torch is not installed')
    def test_conv2d_matches_torch(self):
        import torch
        x = np.random.RandomState(37).randn(2, 3, 7, 7)
        w = np.random.RandomState(38).randn(4, 3, 3, 3)
        ours = F.conv2d(Tensor(x, dtype=np.float64), Tensor(w, dtype=np.float64), stride=2, padding=1)
        theirs = torch.nn.functional.conv2d(torch.from_numpy(x), torch.from_numpy(w), stride=2, padding=1)
        np.testing.assert_allclose(ours.data, theirs.numpy(), rtol=1e-10, atol=1e-10)


if __name__ == '__main__':
    unittest.main()

# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

import numpy as np

from retinakit.autograd.tensor import Tensor, no_grad


def _scalarize(out, cotangent):
    if out.size == 1:
        return out.sum()
    return (out * Tensor(cotangent, dtype=out.dtype)).sum()


def relative_error(analytic, numeric):
    """Elementwise ``|a - n| / max(|a|, |n|, 1)``."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    scale = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1.0)
    return np.abs(analytic - numeric) / scale


def max_relative_error(fn, inputs, eps=1e-5, num_checks=None, seed=0):
    """Largest relative error between the analytic gradient of ``fn(*inputs)``
    and its central finite difference ``(f(x+h) - f(x-h)) / 2h``.

    Non-scalar outputs are contracted with a fixed random cotangent. When
    *num_checks* is given, only that many (input, element) pairs are checked,
    chosen with *seed*; otherwise every element of every input that requires
    gradients is checked.
    """
    rng = np.random.RandomState(seed)
    inputs = [x for x in inputs]
    for x in inputs:
        x.grad = None

    out = fn(*inputs)
    cotangent = rng.uniform(-1, 1, size=out.shape) if out.size > 1 else None
    _scalarize(out, cotangent).backward()

    candidates = [
        (i, j) for i, x in enumerate(inputs) if x.requires_grad for j in range(x.size)
    ]
    if num_checks is not None and num_checks < len(candidates):
        picks = rng.choice(len(candidates), size=num_checks, replace=False)
        candidates = [candidates[k] for k in sorted(picks)]

    worst = 0.0
    with no_grad():
        for i, j in candidates:
            x = inputs[i]
            flat = x.data.reshape(-1)
            orig = flat[j]
            flat[j] = orig + eps
            f_plus = _scalarize(fn(*inputs), cotangent).item()
            flat[j] = orig - eps
            f_minus = _scalarize(fn(*inputs), cotangent).item()
            flat[j] = orig
            numeric = (f_plus - f_minus) / (2 * eps)
            analytic = x.grad.reshape(-1)[j] if x.grad is not None else 0.0
            worst = max(worst, float(relative_error(analytic, numeric)))
    return worst


def gradcheck(fn, inputs, eps=1e-5, tol=1e-5, num_checks=None, seed=0):
    """Return True if analytic and finite-difference gradients agree within *tol*."""
    return max_relative_error(fn, inputs, eps=eps, num_checks=num_checks, seed=seed) < tol

# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

"""
Saliency maps of a classifier decision: occlusion, integrated gradients and
Grad-CAM on the ViT token states, plus the attention mask and GANomaly
reconstruction error as maps, and the side-by-side export panel.

*model* arguments are callables mapping a ``(N, 3, H, W)`` batch to class
logits (a tuple output contributes its first element). Images are
``(3, H, W)`` or ``(H, W, 3)`` arrays.
"""

import contextlib

import numpy as np

from retinakit import imaging, utils
from retinakit.autograd import ShapeError, Tensor, no_grad


METHODS = ('occlusion8', 'occlusion16', 'intgrad', 'gradcam', 'mask', 'recon')
PANEL_ORDER = ('occlusion8', 'occlusion16', 'intgrad', 'gradcam', 'mask')


class SaliencyMap(object):
    """H x W importance map of one image.

    Args:
        values (ndarray): raw importance values
        method (str): name of the method that produced the map
        p90 (ndarray, optional): boolean map of the most important pixels
    """

    def __init__(self, values, method, p90=None):
        values = np.asarray(values, dtype=np.float64)
        if values.ndim != 2:
            raise ShapeError('saliency map must be 2-D, got shape {}'.format(values.shape))
        if not np.isfinite(values).all():
            raise ValueError('{} map has non-finite values'.format(method))
        self.values = values
        self.method = method
        self.p90 = p90
        self.value_range = (float(values.min()), float(values.max()))

    @property
    def shape(self):
        return self.values.shape

    def normalized(self):
        """The map min-max scaled to [0, 1] (all zeros for a constant map)."""
        return utils.minmax_normalize(self.values)[0]

    def save_png(self, path):
        imaging.save_png(self.normalized(), path)

    def __repr__(self):
        return 'SaliencyMap(method={}, shape={}, range=[{:.4g}, {:.4g}])'.format(
            self.method, self.shape, *self.value_range)


def to_chw(img):
    img = utils.as_array(img).astype(np.float64)
    if img.ndim != 3:
        raise ShapeError('expected a (3, H, W) or (H, W, 3) image, got shape {}'.format(img.shape))
    if img.shape[0] == 3:
        return img
    if img.shape[-1] == 3:
        return img.transpose(2, 0, 1)
    raise ShapeError('expected 3 color channels, got shape {}'.format(img.shape))


def to_hwc(img):
    return to_chw(img).transpose(1, 2, 0)


@contextlib.contextmanager
def _eval_mode(model):
    was_training = getattr(model, 'training', None)
    if was_training is not None:
        model.eval()
    try:
        yield
    finally:
        if was_training is not None:
            model.train(was_training)


def _logits(model, x):
    out = model(x)
    if isinstance(out, tuple):
        out = out[0]
    return out


def target_scores(model, x, target, batch_size=32):
    """Logit of class *target* for every image of the ``(N, 3, H, W)`` batch *x*."""
    scores = []
    with no_grad(), _eval_mode(model):
        for i in range(0, len(x), batch_size):
            logits = utils.as_array(_logits(model, x[i:i + batch_size]))
            scores.append(np.asarray(logits, dtype=np.float64).reshape(logits.shape[0], -1)[:, target])
    return np.concatenate(scores)


def class_scores(img, model):
    """Logits of every class for one image."""
    with no_grad(), _eval_mode(model):
        logits = utils.as_array(_logits(model, to_chw(img)[None]))
    return np.asarray(logits, dtype=np.float64)[0]


def _baseline_image(img, baseline):
    if baseline is None:
        return np.full_like(img, img.mean())
    baseline = np.asarray(baseline, dtype=np.float64)
    if baseline.ndim == 0:
        return np.full_like(img, float(baseline))
    if baseline.shape == (3,):
        return np.broadcast_to(baseline[:, None, None], img.shape).copy()
    baseline = to_chw(baseline)
    if baseline.shape != img.shape:
        raise ShapeError('baseline {} does not match image {}'.format(baseline.shape, img.shape))
    return baseline


def occlusion(img, model, target, patch=8, baseline_value=None, frac=0.1, batch_size=32):
    """Occlusion saliency over non-overlapping *patch* x *patch* tiles.

    Every tile is replaced by *baseline_value* (a scalar, an RGB triple or a
    full image; the image mean by default) and its impact is the drop of
    the *target* logit. The map holds each tile's impact on all of its
    pixels; ``p90`` marks the ``ceil(frac * n_tiles)`` tiles of largest
    impact.
    """
    img = to_chw(img)
    _, h, w = img.shape
    if h % patch != 0 or w % patch != 0:
        raise ShapeError('image side {}x{} is not divisible by patch {}'.format(h, w, patch))
    baseline = _baseline_image(img, baseline_value)
    gh, gw = h // patch, w // patch

    occluded = np.repeat(img[None], gh * gw, axis=0)
    for k in range(gh * gw):
        r, c = divmod(k, gw)
        rs, cs = slice(r * patch, (r + 1) * patch), slice(c * patch, (c + 1) * patch)
        occluded[k][:, rs, cs] = baseline[:, rs, cs]

    scores = target_scores(model, np.concatenate([img[None], occluded]), target, batch_size)
    impact = (scores[0] - scores[1:]).reshape(gh, gw)
    tiles = utils.top_fraction_mask(impact, frac)
    expand = np.ones((patch, patch))
    return SaliencyMap(np.kron(impact, expand), 'occlusion{}'.format(patch),
                       p90=np.kron(tiles, expand).astype(bool))


def combined_p90(maps, frac=0.1):
    """Pixels in the top *frac* of the mean of the min-max normalized maps
    (the occlusion maps of both tile sizes)."""
    if not maps:
        raise ValueError('no maps to combine')
    if len(set(m.shape for m in maps)) != 1:
        raise ShapeError('maps differ in shape: {}'.format([m.shape for m in maps]))
    mean = np.mean([m.normalized() for m in maps], axis=0)
    return utils.top_fraction_mask(mean, frac)


def integrated_gradients(img, model, target, baseline=None, steps=64, batch_size=32):
    """Integrated gradients from *baseline* (black by default) to *img*.

    The path integral is the trapezoidal sum over ``k / steps`` for
    ``k = 0..steps``; attributions are summed over the color channels.
    """
    if steps < 8:
        raise ValueError('integrated gradients needs at least 8 steps, got {}'.format(steps))
    img = to_chw(img)
    if baseline is None:
        baseline = np.zeros_like(img)
    else:
        baseline = np.asarray(baseline, dtype=np.float64)
        if baseline.ndim == 3 and baseline.shape[-1] == 3 and baseline.shape != img.shape:
            baseline = baseline.transpose(2, 0, 1)
        if baseline.shape != img.shape:
            raise ShapeError('baseline {} does not match image {}'.format(baseline.shape, img.shape))

    delta = img - baseline
    alphas = np.arange(steps + 1, dtype=np.float64) / steps
    weights = np.ones(steps + 1)
    weights[[0, -1]] = 0.5
    grad_sum = np.zeros_like(img)
    with _eval_mode(model):
        for i in range(0, steps + 1, batch_size):
            a = alphas[i:i + batch_size]
            w = weights[i:i + batch_size]
            path = Tensor(baseline[None] + a[:, None, None, None] * delta[None], requires_grad=True)
            logits = _logits(model, path)
            logits[:, target].sum().backward()
            grad_sum += (w[:, None, None, None] * path.grad.astype(np.float64)).sum(axis=0)
            if hasattr(model, 'zero_grad'):
                model.zero_grad()
    attributions = (delta * grad_sum / steps).sum(axis=0)
    return SaliencyMap(attributions, 'intgrad')


def _classifier_input(model, x):
    """The ViT and the input it sees: a masked classifier scores ``M * x``."""
    classifier = getattr(model, 'classifier', None)
    if classifier is None:
        return model, x
    from retinakit.models.mask_unet import apply_mask, mask_forward
    with no_grad():
        masked = apply_mask(mask_forward(model.mask_net, x).mask, x)
    return classifier, masked.detach()


def grad_cam(img, vit_model, target, block_index=-1):
    """Grad-CAM over the token states entering transformer block *block_index*.

    Patch-token activations (class token dropped) are weighted by the
    token-averaged gradient of the *target* logit, summed over the
    embedding, rectified, laid out on the patch grid and upsampled to the
    image size by repetition.
    """
    img = to_chw(img)
    with _eval_mode(vit_model):
        vit, x = _classifier_input(vit_model, Tensor(img[None]))
        depth = vit.cfg.depth
        if not -depth <= block_index < depth:
            raise IndexError('block index {} out of range for depth {}'.format(block_index, depth))
        vit.zero_grad()
        logits, inner_states = vit(x, return_inner_states=True)
        # inner_states[0] is the embedding, so block i reads inner_states[i]
        states = inner_states[block_index % depth]
        states.retain_grad()
        logits[0, target].backward()
        acts = states.data[0, 1:].astype(np.float64)
        grads = states.grad[0, 1:].astype(np.float64)
        vit.zero_grad()

    weights = grads.mean(axis=0)
    cam = np.maximum(acts @ weights, 0.)
    p = vit.cfg.patch_size
    g = vit.cfg.image_side // p
    cam = cam.reshape(g, g)
    return SaliencyMap(np.repeat(np.repeat(cam, p, axis=0), p, axis=1), 'gradcam')


def attention_mask_map(img, model):
    """The mask network's attention map of a masked classifier (or bare mask network)."""
    from retinakit.models.mask_unet import mask_forward
    net = getattr(model, 'mask_net', None)
    if net is None:
        net = model
    with no_grad(), _eval_mode(net):
        mask = mask_forward(net, Tensor(to_chw(img)[None])).mask.data
    return SaliencyMap(mask[0, 0], 'mask')


def reconstruction_map(img, model, frac=0.1):
    """Channel-summed absolute GANomaly reconstruction error; ``p90`` marks
    the ``ceil(frac * H * W)`` largest errors."""
    from retinakit.models.ganomaly import anomaly_score
    record = anomaly_score(model, to_chw(img)[None], frac=frac)[0]
    return SaliencyMap(record.error_map, 'recon', p90=record.p90_map)


def _panel_tile(m):
    values = m.normalized() if isinstance(m, SaliencyMap) else utils.minmax_normalize(m)[0]
    return np.repeat(values[:, :, None], 3, axis=2)


def panel(img, maps):
    """The image followed by every map, side by side, as one H x W' x 3 array."""
    maps = list(maps)
    if not maps:
        raise ValueError('export_panel needs at least one map')
    original = np.clip(to_hwc(img), 0., 1.)
    tiles = [original]
    for m in maps:
        shape = m.shape if isinstance(m, SaliencyMap) else np.shape(m)
        if tuple(shape) != original.shape[:2]:
            raise ShapeError('map {} does not match image {}'.format(tuple(shape), original.shape[:2]))
        tiles.append(_panel_tile(m))
    return np.concatenate(tiles, axis=1)


def export_panel(img, maps, path):
    """Write :func:`panel` as an 8-bit PNG to *path*."""
    imaging.save_png(panel(img, maps), path)
    return path

# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

from collections import namedtuple

from retinakit import utils
from retinakit.autograd import ShapeError, Tensor, as_tensor, no_grad, functional as F

from . import RetinaCriterion, register_criterion


GanomalyLosses = namedtuple('GanomalyLosses', ['rec', 'adv', 'lat', 'kl', 'mask', 'total'])

LOSS_KEYS = ('rec', 'adv', 'lat', 'kl', 'mask', 'disc')


def reconstruction_loss(x, x_hat):
    return F.mean(F.abs(x - x_hat))


def adversarial_feature_loss(real_features, fake_features):
    diff = real_features.detach() - fake_features
    return F.mean(diff * diff)


def latent_loss(z, z_hat):
    diff = z - z_hat
    return F.mean(diff * diff)


def kl_loss(mu, logvar):
    """KL divergence to the standard normal, averaged over batch and latent dims."""
    return F.mean((mu * mu + F.exp(logvar) - logvar - 1.) * 0.5)


def percentile_selection(x, mask, frac=0.1):
    """Boolean (N, H, W) map of the ``ceil(frac * H * W)`` pixels with the
    largest channel-summed attention-weighted intensity of each image."""
    x = utils.as_array(x)
    mask = utils.as_array(mask)
    if mask.ndim == 4:
        mask = mask[:, 0]
    if mask.shape != (x.shape[0],) + x.shape[2:]:
        raise ShapeError('mask {} does not match images {}'.format(mask.shape, x.shape))
    weighted = (x * mask[:, None]).sum(axis=1)
    return utils.top_fraction_mask(weighted, frac)


def masked_percentile_loss(x, x_hat, mask, frac=0.1):
    """Mean channel-summed absolute reconstruction error over the pixels
    selected by :func:`percentile_selection`.

    The selection is a constant of the graph; gradients only reach the
    selected pixels of *x_hat*.
    """
    x = as_tensor(x)
    selected = percentile_selection(x, mask, frac)
    k = int(selected[0].sum())
    weights = selected.astype(x_hat.dtype) / (k * selected.shape[0])
    err = F.sum(F.abs(x - x_hat), axis=1)
    return F.sum(err * weights)


def discriminator_loss(real_logits, fake_logits):
    """Binary cross-entropy pushing real images to 1 and reconstructions to 0."""
    return (F.binary_cross_entropy_with_logits(real_logits, 1)
            + F.binary_cross_entropy_with_logits(fake_logits, 0))


def generator_losses(model, x, noise=None, weights=None, mask=None, frac=0.1):
    """Forward the generator and compute every weighted loss term.

    Returns the :class:`GanomalyLosses` and the reconstruction.
    """
    cfg = model.cfg
    w = weights or cfg
    x = x if isinstance(x, Tensor) else Tensor(x)
    x_hat, z, z_hat, mu, logvar = model.ede_forward(x, noise=noise)
    _, real_features = model.discriminator(x)
    _, fake_features = model.discriminator(x_hat)

    rec = reconstruction_loss(x, x_hat)
    adv = adversarial_feature_loss(real_features, fake_features)
    lat = latent_loss(z, z_hat)
    total = rec * w.w_rec + adv * w.w_adv + lat * w.w_lat
    kl = mask_term = None
    if cfg.uses_kl:
        kl = kl_loss(mu, logvar)
        total = total + kl * w.w_kl
    if cfg.uses_mask:
        if mask is None:
            mask = model.attention_mask(x)
        mask_term = masked_percentile_loss(x, x_hat, mask, frac)
        total = total + mask_term * w.w_mask
    return GanomalyLosses(rec, adv, lat, kl, mask_term, total), x_hat


@register_criterion('ganomaly_loss')
class GanomalyCriterion(RetinaCriterion):
    """Weighted generator objective; the discriminator loss is computed by
    :meth:`discriminator_step`."""

    def __init__(self, args, task):
        super().__init__(args, task)
        for name in ('w_rec', 'w_adv', 'w_lat', 'w_kl', 'w_mask'):
            if getattr(args, name) < 0:
                raise ValueError('--{} must be non-negative'.format(name.replace('_', '-')))
        self.w_rec = args.w_rec
        self.w_adv = args.w_adv
        self.w_lat = args.w_lat
        self.w_kl = args.w_kl
        self.w_mask = args.w_mask
        self.percentile_frac = args.percentile_frac

    @staticmethod
    def add_args(parser):
        """Add criterion-specific arguments to the parser."""
        # fmt: off
        parser.add_argument('--w-rec', default=50., type=float, metavar='D',
                            help='weight of the L1 reconstruction loss')
        parser.add_argument('--w-adv', default=1., type=float, metavar='D',
                            help='weight of the adversarial feature loss')
        parser.add_argument('--w-lat', default=1., type=float, metavar='D',
                            help='weight of the latent consistency loss')
        parser.add_argument('--w-kl', default=0.3, type=float, metavar='D',
                            help='weight of the KL regularization (kl variants)')
        parser.add_argument('--w-mask', default=50., type=float, metavar='D',
                            help='weight of the masked percentile loss (kl+mask variant)')
        parser.add_argument('--percentile-frac', default=0.1, type=float, metavar='F',
                            help='fraction of pixels selected by the masked percentile loss')
        # fmt: on

    def generator_step(self, model, sample, noise=None):
        losses, x_hat = generator_losses(
            model, sample['net_input']['x'], noise=noise, weights=self, frac=self.percentile_frac,
        )
        return losses, x_hat

    def discriminator_step(self, model, x, x_hat):
        x = x if isinstance(x, Tensor) else Tensor(x)
        real_logits, _ = model.discriminator(x)
        fake_logits, _ = model.discriminator(x_hat.detach())
        return discriminator_loss(real_logits, fake_logits)

    def logging_output(self, losses, disc, nsamples):
        logging_output = {
            'loss': utils.item(losses.total) * nsamples,
            'nsamples': nsamples,
            'sample_size': nsamples,
        }
        for k in LOSS_KEYS:
            value = disc if k == 'disc' else getattr(losses, k)
            if value is not None:
                logging_output[k] = utils.item(value) * nsamples
        return logging_output

    def forward(self, model, sample):
        """Generator objective and discriminator loss for evaluation."""
        losses, x_hat = self.generator_step(model, sample)
        with no_grad():
            disc = self.discriminator_step(model, sample['net_input']['x'], x_hat)
        nsamples = sample['nsamples']
        return losses.total, nsamples, self.logging_output(losses, disc, nsamples)

    @staticmethod
    def aggregate_logging_outputs(logging_outputs):
        """Aggregate logging outputs from several batches."""
        nsamples = sum(log.get('nsamples', 0) for log in logging_outputs)
        agg_output = {
            'loss': sum(log.get('loss', 0) for log in logging_outputs) / max(nsamples, 1),
            'nsamples': nsamples,
            'sample_size': nsamples,
        }
        for k in LOSS_KEYS:
            if any(k in log for log in logging_outputs):
                agg_output[k] = sum(log.get(k, 0) for log in logging_outputs) / max(nsamples, 1)
        return agg_output


def total_from_components(losses, weights):
    """Recompute the generator objective from its components."""
    total = weights.w_rec * utils.item(losses.rec) + weights.w_adv * utils.item(losses.adv) \
        + weights.w_lat * utils.item(losses.lat)
    if losses.kl is not None:
        total += weights.w_kl * utils.item(losses.kl)
    if losses.mask is not None:
        total += weights.w_mask * utils.item(losses.mask)
    return total

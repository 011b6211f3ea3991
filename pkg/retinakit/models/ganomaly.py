# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

import numpy as np

from retinakit import utils
from retinakit.autograd import ShapeError, Tensor, no_grad, functional as F
from retinakit.modules import Conv2d, Linear, Module, ModuleList

from . import RetinaModel, register_model, register_model_architecture
from .mask_unet import MaskUNet, mask_forward


VARIANTS = ('vanilla', 'kl', 'kl+mask')

# weight of the mean absolute reconstruction error in the default anomaly score
RECON_WEIGHT = 1.


def _parse_widths(widths):
    if isinstance(widths, str):
        widths = [int(w) for w in widths.split(',') if w.strip()]
    return tuple(int(w) for w in widths)


class GanomalyConfig(object):
    """Encoder-decoder-encoder hyper-parameters and generator loss weights."""

    def __init__(self, image_side=64, latent_dim=64, widths=(32, 64, 128, 256), variant='kl',
                 w_rec=50., w_adv=1., w_lat=1., w_kl=0.3, w_mask=50.):
        widths = _parse_widths(widths)
        if variant not in VARIANTS:
            raise ValueError('unknown variant {!r}, expected one of {}'.format(variant, VARIANTS))
        if len(widths) != 4:
            raise ValueError('expected 4 stage widths, got {}'.format(widths))
        if image_side % 16 != 0:
            raise ShapeError('image_side {} is not divisible by 16'.format(image_side))
        for name, w in (('w_rec', w_rec), ('w_adv', w_adv), ('w_lat', w_lat), ('w_kl', w_kl), ('w_mask', w_mask)):
            if w < 0:
                raise ValueError('{} must be non-negative, got {}'.format(name, w))
        self.image_side = image_side
        self.latent_dim = latent_dim
        self.widths = widths
        self.variant = variant
        self.w_rec = w_rec
        self.w_adv = w_adv
        self.w_lat = w_lat
        self.w_kl = w_kl
        self.w_mask = w_mask

    @classmethod
    def from_args(cls, args):
        return cls(
            image_side=args.image_side, latent_dim=args.latent_dim, widths=args.gan_widths,
            variant=args.variant, w_rec=args.w_rec, w_adv=args.w_adv, w_lat=args.w_lat,
            w_kl=args.w_kl, w_mask=args.w_mask,
        )

    @property
    def uses_kl(self):
        return self.variant in ('kl', 'kl+mask')

    @property
    def uses_mask(self):
        return self.variant == 'kl+mask'

    @property
    def bottleneck_side(self):
        return self.image_side // 16

    def __repr__(self):
        return 'GanomalyConfig({})'.format(', '.join('{}={}'.format(k, v) for k, v in vars(self).items()))


class Encoder(Module):
    """Four stride-2 conv stages followed by a linear map to the latent mean
    (and, with *logvar_head*, the log-variance)."""

    def __init__(self, cfg, logvar_head=False):
        super().__init__()
        channels = (3,) + cfg.widths
        self.convs = ModuleList([
            Conv2d(channels[i], channels[i + 1], 3, stride=2, padding=1) for i in range(4)
        ])
        flat = cfg.widths[-1] * cfg.bottleneck_side ** 2
        self.fc_mu = Linear(flat, cfg.latent_dim)
        if logvar_head:
            self.fc_logvar = Linear(flat, cfg.latent_dim)
        else:
            self.fc_logvar = None

    def forward(self, x):
        h = x
        for conv in self.convs:
            h = F.leaky_relu(conv(h), 0.2)
        h = F.reshape(h, (h.shape[0], -1))
        logvar = self.fc_logvar(h) if self.fc_logvar is not None else None
        return self.fc_mu(h), logvar


class Decoder(Module):

    def __init__(self, cfg):
        super().__init__()
        self.cfg = cfg
        s, w = cfg.bottleneck_side, cfg.widths[-1]
        self.fc = Linear(cfg.latent_dim, w * s * s)
        channels = tuple(reversed(cfg.widths)) + (3,)
        self.convs = ModuleList([
            Conv2d(channels[i], channels[i + 1], 3, padding=1) for i in range(4)
        ])

    def forward(self, z):
        s = self.cfg.bottleneck_side
        h = F.leaky_relu(self.fc(z), 0.2)
        h = F.reshape(h, (z.shape[0], self.cfg.widths[-1], s, s))
        for i, conv in enumerate(self.convs):
            h = conv(F.upsample_nearest2d(h, 2))
            if i < len(self.convs) - 1:
                h = F.leaky_relu(h, 0.2)
        return F.sigmoid(h)


class Discriminator(Module):
    """Four stride-2 conv stages and a real/fake logit; the output of the third
    stage serves as the feature map for the adversarial feature loss."""

    feature_stage = 3

    def __init__(self, cfg):
        super().__init__()
        channels = (3,) + cfg.widths
        self.convs = ModuleList([
            Conv2d(channels[i], channels[i + 1], 3, stride=2, padding=1) for i in range(4)
        ])
        self.classifier = Linear(cfg.widths[-1] * cfg.bottleneck_side ** 2, 1)

    def forward(self, x):
        h = x
        features = None
        for i, conv in enumerate(self.convs, start=1):
            h = F.leaky_relu(conv(h), 0.2)
            if i == self.feature_stage:
                features = h
        logits = self.classifier(F.reshape(h, (h.shape[0], -1)))
        return F.reshape(logits, (h.shape[0],)), features


class AnomalyRecord(object):
    """Anomaly score of one image, its channel-summed reconstruction error map
    and the map of the ``ceil(0.1 * H * W)`` largest errors."""

    def __init__(self, score, error_map, p90_map, label=None, dataset_tag=None, path=None):
        self.score = float(score)
        self.error_map = error_map
        self.p90_map = p90_map
        self.label = label
        self.dataset_tag = dataset_tag
        self.path = path

    def __repr__(self):
        return 'AnomalyRecord(score={:.6g}, label={})'.format(self.score, self.label)


@register_model('ganomaly')
class GanomalyModel(RetinaModel):
    """GANomaly generator (Enc1 -> Dec -> Enc2) plus its discriminator.

    In the KL variants the first encoder predicts a latent mean and
    log-variance and samples ``z = mu + exp(logvar / 2) * eps`` while
    training; in evaluation mode ``z = mu``. The ``kl+mask`` variant carries a
    frozen mask network used by the masked percentile loss.
    """

    stage = 'ganomaly'

    def __init__(self, cfg, mask_net=None):
        super().__init__()
        if cfg.uses_mask and mask_net is None:
            raise ValueError('variant kl+mask needs a trained mask network')
        self.cfg = cfg
        self.encoder1 = Encoder(cfg, logvar_head=cfg.uses_kl)
        self.decoder = Decoder(cfg)
        self.encoder2 = Encoder(cfg, logvar_head=False)
        self.discriminator = Discriminator(cfg)
        if mask_net is not None:
            if mask_net.image_side != cfg.image_side:
                raise ShapeError('mask network side {} does not match image side {}'.format(
                    mask_net.image_side, cfg.image_side))
            for p in mask_net.parameters():
                p.requires_grad = False
            self.mask_net = mask_net
        else:
            self.mask_net = None

    @staticmethod
    def add_args(parser):
        """Add model-specific arguments to the parser."""
        # fmt: off
        parser.add_argument('--image-side', type=int, metavar='N',
                            help='side of the (square) input images')
        parser.add_argument('--latent-dim', type=int, metavar='N',
                            help='dimension of the latent code')
        parser.add_argument('--gan-widths', metavar='W1,W2,W3,W4',
                            help='channel widths of the four conv stages')
        parser.add_argument('--variant', choices=VARIANTS,
                            help='vanilla, KL-regularized, or KL-regularized with the masked '
                                 'percentile reconstruction loss')
        parser.add_argument('--mask-checkpoint', metavar='FILE',
                            help='vit+mask (or mask_unet) checkpoint providing the mask network '
                                 'of the kl+mask variant')
        # fmt: on

    @classmethod
    def build_model(cls, args, task):
        """Build a new model instance."""
        base_architecture(args)
        cfg = GanomalyConfig.from_args(args)
        mask_net = None
        if cfg.uses_mask:
            mask_net = MaskUNet(image_side=cfg.image_side)
            if getattr(args, 'load_pretrained', True):
                if not getattr(args, 'mask_checkpoint', None):
                    raise ValueError('variant kl+mask needs --mask-checkpoint')
                from retinakit import checkpoint_utils
                checkpoint_utils.load_submodule(mask_net, args.mask_checkpoint, ('mask', 'vit+mask'),
                                                prefix_by_stage={'vit+mask': 'mask_net.'})
        return cls(cfg, mask_net=mask_net)

    def ede_forward(self, x, noise=None):
        """
        Args:
            x (Tensor or ndarray): images of shape `(batch, 3, side, side)`
            noise (ndarray, optional): reparameterization noise; drawn from
                the global NumPy generator while training when omitted

        Returns:
            tuple of reconstruction, latent code, re-encoded latent code,
            latent mean and latent log-variance (``None`` for ``vanilla``)
        """
        x = x if isinstance(x, Tensor) else Tensor(x)
        s = self.cfg.image_side
        if x.ndim != 4 or x.shape[1] != 3 or x.shape[2] != s or x.shape[3] != s:
            raise ShapeError('expected (B, 3, {s}, {s}) images, got {shape}'.format(s=s, shape=x.shape))
        mu, logvar = self.encoder1(x)
        z = mu
        if logvar is not None:
            if noise is None and self.training:
                noise = np.random.standard_normal(mu.shape)
            if noise is not None:
                if not isinstance(noise, Tensor):
                    noise = Tensor(noise, dtype=mu.dtype)
                if noise.shape != mu.shape:
                    raise ShapeError('noise {} does not match latent {}'.format(noise.shape, mu.shape))
                z = mu + F.exp(logvar * 0.5) * noise
        x_hat = self.decoder(z)
        z_hat, _ = self.encoder2(x_hat)
        return x_hat, z, z_hat, mu, logvar

    def forward(self, x, noise=None):
        return self.ede_forward(x, noise=noise)

    def discriminate(self, x):
        return self.discriminator(x)

    def attention_mask(self, x):
        """Mask of the frozen mask network as an (N, 1, H, W) array."""
        if self.mask_net is None:
            raise ValueError('model has no mask network (variant {})'.format(self.cfg.variant))
        with no_grad():
            return mask_forward(self.mask_net, x).mask.data

    def generator_parameters(self):
        for module in (self.encoder1, self.decoder, self.encoder2):
            for p in module.parameters():
                yield p

    def optimizer_groups(self):
        return [list(self.generator_parameters()), list(self.discriminator.parameters())]


def anomaly_score(model, x, recon_weight=RECON_WEIGHT, frac=0.1, allow_untrained=False):
    """Score a batch of images with a trained :class:`GanomalyModel`.

    The score is the mean squared latent deviation, plus *recon_weight*
    times the mean absolute reconstruction error; ``recon_weight=0`` gives
    the latent-only score. Returns one :class:`AnomalyRecord` per image.
    """
    if not model.is_trained and not allow_untrained:
        raise ValueError('anomaly_score needs a trained model (0 updates recorded)')
    was_training = model.training
    model.eval()
    try:
        with no_grad():
            x = x if isinstance(x, Tensor) else Tensor(x)
            x_hat, z, z_hat, _, _ = model.ede_forward(x)
    finally:
        model.train(was_training)
    x, x_hat = x.data.astype(np.float64), x_hat.data.astype(np.float64)
    z, z_hat = z.data.astype(np.float64), z_hat.data.astype(np.float64)

    latent = np.mean((z - z_hat) ** 2, axis=1)
    abs_err = np.abs(x - x_hat)
    scores = latent + recon_weight * abs_err.mean(axis=(1, 2, 3))
    error_maps = abs_err.sum(axis=1)
    p90_maps = utils.top_fraction_mask(error_maps, frac)
    return [AnomalyRecord(s, e, p) for s, e, p in zip(scores, error_maps, p90_maps)]


@register_model_architecture('ganomaly', 'ganomaly')
def base_architecture(args):
    args.image_side = getattr(args, 'image_side', 64)
    args.latent_dim = getattr(args, 'latent_dim', 128)
    args.gan_widths = getattr(args, 'gan_widths', '32,64,128,256')
    args.variant = getattr(args, 'variant', 'kl')
    args.mask_checkpoint = getattr(args, 'mask_checkpoint', None)
    args.w_rec = getattr(args, 'w_rec', 50.)
    args.w_adv = getattr(args, 'w_adv', 1.)
    args.w_lat = getattr(args, 'w_lat', 1.)
    args.w_kl = getattr(args, 'w_kl', 0.3)
    args.w_mask = getattr(args, 'w_mask', 50.)


@register_model_architecture('ganomaly', 'ganomaly_desk')
def ganomaly_desk(args):
    args.image_side = getattr(args, 'image_side', 64)
    args.latent_dim = getattr(args, 'latent_dim', 64)
    base_architecture(args)


@register_model_architecture('ganomaly', 'ganomaly_tiny')
def ganomaly_tiny(args):
    args.image_side = getattr(args, 'image_side', 32)
    args.latent_dim = getattr(args, 'latent_dim', 8)
    args.gan_widths = getattr(args, 'gan_widths', '4,4,8,8')
    base_architecture(args)

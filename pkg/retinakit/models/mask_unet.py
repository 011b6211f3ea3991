# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

from retinakit import imaging
from retinakit.autograd import ShapeError, Tensor, as_tensor, functional as F
from retinakit.modules import (
    AdaptiveNorm,
    Conv2d,
    Module,
    ModuleList,
    ResidualBlock,
    ResidualBlockWithAttention,
)
from retinakit.utils import as_array

from . import RetinaModel, register_model, register_model_architecture


# (name, input channels, output channels); the input channels of the up
# stages count the concatenated skip connection
STAGES = (
    ('input', 3, 32),
    ('down1', 32, 32),
    ('down2', 32, 64),
    ('down3', 64, 128),
    ('down4', 128, 128),
    ('middle', 128, 128),
    ('up4', 256, 128),
    ('up3', 256, 64),
    ('up2', 128, 32),
    ('up1', 64, 32),
    ('output', 32, 1),
)

# down4 and up1 keep the resolution
DOWNSAMPLING = ('down1', 'down2', 'down3')
UPSAMPLING = ('up4', 'up3', 'up2')


def stage_channels():
    return [out for _, _, out in STAGES]


class MaskOutput(object):
    """Attention mask ``M`` of shape (N, 1, H, W) and its L1 norm.

    ``l1`` is the per-sample pixel sum averaged over the batch; it is a
    graph tensor so it can enter a loss.
    """

    def __init__(self, mask, l1, stage_channels=None):
        self.mask = mask
        self.l1 = l1
        self.stage_channels = stage_channels or []

    @property
    def num_pixels(self):
        return self.mask.shape[2] * self.mask.shape[3]

    def numpy(self):
        return as_array(self.mask)[:, 0]


class DownStage(Module):

    def __init__(self, in_channels, out_channels, downsample):
        super().__init__()
        self.block = ResidualBlock(in_channels, out_channels)
        if downsample:
            self.down = Conv2d(out_channels, out_channels, 3, stride=2, padding=1)
        else:
            self.down = None

    def forward(self, x):
        skip = self.block(x)
        out = self.down(skip) if self.down is not None else skip
        return out, skip


class UpStage(Module):

    def __init__(self, in_channels, out_channels, upsample):
        super().__init__()
        self.block = ResidualBlock(in_channels, out_channels)
        if upsample:
            self.up = Conv2d(out_channels, out_channels, 3, padding=1)
        else:
            self.up = None

    def forward(self, x, skip):
        if x.shape[2:] != skip.shape[2:]:
            raise ShapeError('skip connection {} does not match {}'.format(skip.shape, x.shape))
        h = self.block(F.concat([x, skip], axis=1))
        if self.up is not None:
            h = self.up(F.upsample_nearest2d(h, 2))
        return h


@register_model('mask_unet')
class MaskUNet(RetinaModel):
    """Residual U-Net producing a single-channel attention mask in (0, 1).

    Skip connections are taken from each down stage before it downsamples,
    so every up stage concatenates a map of its own resolution.
    """

    stage = 'mask'

    def __init__(self, image_side=64):
        super().__init__()
        if image_side % 8 != 0:
            raise ShapeError('mask network needs a side divisible by 8, got {}'.format(image_side))
        self.image_side = image_side
        table = {name: (cin, cout) for name, cin, cout in STAGES}

        self.input_norm = AdaptiveNorm(3, spatial=True)
        self.input_conv = Conv2d(3, table['input'][1], 3, padding=1)
        self.down = ModuleList([
            DownStage(*table[name], downsample=name in DOWNSAMPLING)
            for name in ('down1', 'down2', 'down3', 'down4')
        ])
        self.middle = ResidualBlockWithAttention(table['middle'][1])
        self.up = ModuleList([
            UpStage(*table[name], upsample=name in UPSAMPLING)
            for name in ('up4', 'up3', 'up2', 'up1')
        ])
        self.output_conv = Conv2d(table['output'][0], table['output'][1], 3, padding=1)

    @staticmethod
    def add_args(parser):
        """Add model-specific arguments to the parser."""
        parser.add_argument('--image-side', type=int, metavar='N',
                            help='side of the (square) input images')

    @classmethod
    def build_model(cls, args, task):
        mask_unet_architecture(args)
        return cls(image_side=args.image_side)

    def forward(self, x):
        return mask_forward(self, x)


def mask_forward(net, x):
    """Run the mask network on a (N, 3, H, W) batch and return a :class:`MaskOutput`."""
    x = x if isinstance(x, Tensor) else Tensor(x)
    s = net.image_side
    if x.ndim != 4 or x.shape[1] != 3 or x.shape[2] != s or x.shape[3] != s:
        raise ShapeError('expected (B, 3, {s}, {s}) images, got {shape}'.format(s=s, shape=x.shape))

    channels = []
    h = net.input_conv(net.input_norm(x))
    channels.append(h.shape[1])
    skips = []
    for stage in net.down:
        h, skip = stage(h)
        skips.append(skip)
        channels.append(skip.shape[1])
    h = net.middle(h)
    channels.append(h.shape[1])
    for stage, skip in zip(net.up, reversed(skips)):
        h = stage(h, skip)
        channels.append(h.shape[1])
    mask = F.sigmoid(net.output_conv(h))
    channels.append(mask.shape[1])

    l1 = F.mean(F.sum(mask, axis=(1, 2, 3)))
    return MaskOutput(mask, l1, channels)


def apply_mask(mask, x):
    """Elementwise ``mask * x`` with the mask broadcast over the channels of *x*.

    *mask* may be (H, W), (N, H, W) or (N, 1, H, W); *x* is (N, C, H, W).
    """
    mask = as_tensor(mask.mask if isinstance(mask, MaskOutput) else mask)
    x = as_tensor(x)
    if x.ndim != 4:
        raise ShapeError('expected (N, C, H, W) images, got {}'.format(x.shape))
    if mask.ndim == 2:
        mask = F.reshape(mask, (1, 1) + mask.shape)
    elif mask.ndim == 3:
        mask = F.reshape(mask, (mask.shape[0], 1) + mask.shape[1:])
    elif mask.ndim != 4 or mask.shape[1] != 1:
        raise ShapeError('mask must be (H, W), (N, H, W) or (N, 1, H, W), got {}'.format(mask.shape))
    if mask.shape[2:] != x.shape[2:]:
        raise ShapeError('mask {} does not match image {}'.format(mask.shape[2:], x.shape[2:]))
    if mask.shape[0] not in (1, x.shape[0]):
        raise ShapeError('mask batch {} does not match image batch {}'.format(mask.shape[0], x.shape[0]))
    return mask * x


def export_mask_png(mask, path):
    """Write a single mask (H, W) or the first of a batch as 8-bit grayscale PNG."""
    m = as_array(mask.mask if isinstance(mask, MaskOutput) else mask)
    while m.ndim > 2:
        m = m[0]
    imaging.save_png(m, path)


@register_model_architecture('mask_unet', 'mask_unet')
def mask_unet_architecture(args):
    args.image_side = getattr(args, 'image_side', 64)

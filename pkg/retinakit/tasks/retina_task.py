# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

import os

from retinakit import imaging
from retinakit.autograd import no_grad
from retinakit.data import (
    DataError,
    EpochBatchIterator,
    ImageDataset,
    Manifest,
    SplitSpec,
    filter_quality,
    stratified_split,
)
from retinakit.data.data_utils import STRATIFY_CHOICES


SPLITS = ('train', 'valid', 'test')


class RetinaTask(object):
    """
    Tasks store the class vocabulary, load the split manifests and provide
    helpers for building the model and criterion and for running one
    training or validation step.
    """

    @staticmethod
    def add_args(parser):
        """Add task-specific arguments to the parser."""
        # fmt: off
        parser.add_argument('data', nargs='?',
                            help='manifest file to split, or directory holding '
                                 'train.tsv / valid.tsv / test.tsv manifests')
        parser.add_argument('--valid-frac', default=0.15, type=float, metavar='F',
                            help='fraction of every stratum used for validation')
        parser.add_argument('--test-frac', default=0.15, type=float, metavar='F',
                            help='fraction of every stratum used for testing')
        parser.add_argument('--split-seed', type=int, metavar='N',
                            help='seed of the stratified split (default: --seed)')
        parser.add_argument('--stratify-by', default='label_dataset', choices=STRATIFY_CHOICES,
                            help='strata of the split')
        parser.add_argument('--no-quality-filter', action='store_true',
                            help='keep records flagged as low quality')
        parser.add_argument('--zscore', action='store_true',
                            help='z-score inputs with the per-dataset statistics of the manifest')
        parser.add_argument('--augment', default='none', choices=imaging.STAGES,
                            help='augmentation setup of the training images')
        parser.add_argument('--translation-frac', default=0.1, type=float, metavar='F',
                            help='maximum translation as a fraction of the side')
        parser.add_argument('--max-blur-sigma', default=1.5, type=float, metavar='S',
                            help='upper bound of the Gaussian blur sigma')
        parser.add_argument('--jitter', default=0.2, type=float, metavar='F',
                            help='brightness/contrast factors are drawn from [1-F, 1+F]')
        parser.add_argument('--laplace-strength', default=1.0, type=float, metavar='F',
                            help='strength of the Laplacian enhancement')
        parser.add_argument('--interpolation', default='bilinear', choices=['bilinear', 'nearest'],
                            help='interpolation of the geometric augmentation')
        # fmt: on

    def __init__(self, args, classes, manifests=None):
        self.args = args
        self.classes = list(classes)
        self.datasets = {}
        self._manifests = manifests

    @property
    def num_classes(self):
        return len(self.classes)

    @classmethod
    def setup_task(cls, args, manifests=None, **kwargs):
        """Setup the task (e.g., load the class vocabulary).

        The vocabulary comes from ``args.classes`` when set (as in a
        checkpoint), else from the training manifest.
        """
        classes = getattr(args, 'classes', None)
        if isinstance(classes, str):
            classes = classes.split(',')
        task = cls(args, classes or [], manifests=manifests)
        if not classes:
            task.classes = list(task.manifests()['train'].classes)
        args.classes = ','.join(task.classes)
        print('| [{}] classes: {}'.format(args.task, ', '.join(task.classes)), flush=True)
        return task

    def manifests(self):
        """The (train, valid, test) manifests as a dict, loaded on first use."""
        if self._manifests is None:
            self._manifests = load_split_manifests(self.args)
        return self._manifests

    def manifest(self, split):
        if split not in SPLITS:
            raise KeyError('unknown split: {}'.format(split))
        return self.manifests()[split]

    def policy(self):
        return imaging.AugmentationPolicy.from_args(self.args)

    def image_side(self):
        return self.args.image_side

    def load_dataset(self, split, **kwargs):
        """Load a given dataset split.

        Args:
            split (str): name of the split (e.g., train, valid, test)
        """
        manifest = self.manifest(split)
        if len(manifest) == 0:
            raise DataError('split {} is empty'.format(split))
        self.datasets[split] = ImageDataset(
            manifest, side=self.image_side(), policy=self.policy(), train=split == 'train',
            zscore=getattr(self.args, 'zscore', False),
        )
        print('| {} {} images'.format(split, len(manifest)), flush=True)
        return self.datasets[split]

    def dataset(self, split):
        """
        Return a loaded dataset split.

        Args:
            split (str): name of the split (e.g., train, valid, test)

        Returns:
            a :class:`~retinakit.data.ImageDataset` corresponding to *split*
        """
        if split not in self.datasets:
            raise KeyError('Dataset not loaded: ' + split)
        return self.datasets[split]

    def get_batch_iterator(self, dataset, batch_size, seed=1):
        return EpochBatchIterator(dataset, batch_size, seed=seed)

    def build_model(self, args):
        """
        Build the :class:`~retinakit.models.RetinaModel` instance for this
        task.
        """
        from retinakit import models
        return models.build_model(args, self)

    def build_criterion(self, args):
        """
        Build the :class:`~retinakit.criterions.RetinaCriterion` instance for
        this task.
        """
        from retinakit import criterions
        return criterions.build_criterion(args, self)

    def train_step(self, sample, model, criterion, optimizers):
        """
        Do forward, backward and parameter update for one batch.

        Args:
            sample (dict): the mini-batch
            model (~retinakit.models.RetinaModel): the model
            criterion (~retinakit.criterions.RetinaCriterion): the criterion
            optimizers (list): one :class:`~retinakit.optim.RetinaOptimizer`
                per entry of ``model.optimizer_groups()``

        Returns:
            tuple:
                - the loss
                - the sample size
                - logging outputs to display while training
        """
        model.train()
        model.zero_grad()
        optimizer = optimizers[0]
        loss, sample_size, logging_output = criterion(model, sample)
        optimizer.backward(loss)
        optimizer.step()
        return loss, sample_size, logging_output

    def valid_step(self, sample, model, criterion):
        model.eval()
        with no_grad():
            loss, sample_size, logging_output = criterion(model, sample)
        return loss, sample_size, logging_output

    def aggregate_logging_outputs(self, logging_outputs, criterion):
        return criterion.__class__.aggregate_logging_outputs(logging_outputs)


def load_split_manifests(args):
    """Read the split manifests named by ``args.data``.

    A directory must hold ``train.tsv``, ``valid.tsv`` and ``test.tsv``; a
    single manifest is quality-filtered and split with the stratified
    splitter under ``--split-seed`` (default ``--seed``).
    """
    if not getattr(args, 'data', None):
        raise DataError('no data given (manifest file or split directory)')
    if os.path.isdir(args.data):
        out = {}
        for split in SPLITS:
            path = os.path.join(args.data, split + '.tsv')
            if not os.path.exists(path):
                raise DataError('missing split manifest {}'.format(path))
            out[split] = Manifest.load(path)
        return out
    manifest = Manifest.load(args.data)
    if not getattr(args, 'no_quality_filter', False):
        manifest = filter_quality(manifest)
    seed = args.split_seed if getattr(args, 'split_seed', None) is not None else args.seed
    spec = SplitSpec(args.valid_frac, args.test_frac, seed=seed, stratify_by=args.stratify_by)
    train, valid, test = stratified_split(manifest, spec)
    print('| split {}: train {}, valid {}, test {}'.format(spec, len(train), len(valid), len(test)), flush=True)
    return {'train': train, 'valid': valid, 'test': test}

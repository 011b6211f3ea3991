# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

import importlib
import os

from .retina_model import RetinaModel


MODEL_REGISTRY = {}
ARCH_MODEL_REGISTRY = {}
ARCH_CONFIG_REGISTRY = {}


def build_model(args, task):
    return ARCH_MODEL_REGISTRY[args.arch].build_model(args, task)


def register_model(name):
    """Class decorator adding a :class:`RetinaModel` subclass to the model
    registry under *name*::

        @register_model('vit')
        class ViTClassifier(RetinaModel):
            (...)
    """

    def register_model_cls(cls):
        if name in MODEL_REGISTRY:
            raise ValueError('Cannot register duplicate model ({})'.format(name))
        if not issubclass(cls, RetinaModel):
            raise ValueError('Model ({}: {}) must extend RetinaModel'.format(name, cls.__name__))
        MODEL_REGISTRY[name] = cls
        return cls

    return register_model_cls


def register_model_architecture(model_name, arch_name):
    """Function decorator naming an architecture of a registered model.

    The decorated function receives the parsed :class:`argparse.Namespace`
    and fills in every hyperparameter the command line left unset; the
    architecture is then selectable with ``--arch arch_name``::

        @register_model_architecture('vit', 'vit_toy')
        def vit_toy(args):
            args.image_side = getattr(args, 'image_side', 64)
            (...)
    """

    def register_model_arch_fn(fn):
        if model_name not in MODEL_REGISTRY:
            raise ValueError('Cannot register model architecture for unknown model type ({})'.format(model_name))
        if arch_name in ARCH_MODEL_REGISTRY:
            raise ValueError('Cannot register duplicate model architecture ({})'.format(arch_name))
        if not callable(fn):
            raise ValueError('Model architecture must be callable ({})'.format(arch_name))
        ARCH_MODEL_REGISTRY[arch_name] = MODEL_REGISTRY[model_name]
        ARCH_CONFIG_REGISTRY[arch_name] = fn
        return fn

    return register_model_arch_fn


# register every model module in this directory
for file in sorted(os.listdir(os.path.dirname(__file__))):
    if file.endswith('.py') and not file.startswith('_'):
        importlib.import_module('retinakit.models.' + file[:-len('.py')])

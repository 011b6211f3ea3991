# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

import importlib
import os

from .retina_task import RetinaTask


TASK_REGISTRY = {}
TASK_CLASS_NAMES = set()


def setup_task(args, **kwargs):
    return TASK_REGISTRY[args.task].setup_task(args, **kwargs)


def register_task(name):
    """
    New tasks can be added with the :func:`register_task` function decorator.

    For example::

        @register_task('classification')
        class ClassificationTask(RetinaTask):
            (...)

    .. note::

        All Tasks must implement the :class:`RetinaTask` interface.

    Args:
        name (str): the name of the task
    """

    def register_task_cls(cls):
        if name in TASK_REGISTRY:
            raise ValueError('Cannot register duplicate task ({})'.format(name))
        if not issubclass(cls, RetinaTask):
            raise ValueError('Task ({}: {}) must extend RetinaTask'.format(name, cls.__name__))
        if cls.__name__ in TASK_CLASS_NAMES:
            raise ValueError('Cannot register task with duplicate class name ({})'.format(cls.__name__))
        TASK_REGISTRY[name] = cls
        TASK_CLASS_NAMES.add(cls.__name__)
        return cls

    return register_task_cls


# automatically import any Python files in the tasks/ directory
for file in sorted(os.listdir(os.path.dirname(__file__))):
    if file.endswith('.py') and not file.startswith('_'):
        task_name = file[:file.find('.py')]
        importlib.import_module('retinakit.tasks.' + task_name)


def get_task(name):
    return TASK_REGISTRY[name]

# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

__version__ = '0.1.0'

import retinakit.autograd
import retinakit.modules
import retinakit.data
import retinakit.imaging
import retinakit.optim
import retinakit.optim.lr_scheduler
import retinakit.models
import retinakit.criterions
import retinakit.tasks

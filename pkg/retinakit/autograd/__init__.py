# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

from .tensor import (  # noqa: F401
    ComputationNode,
    DomainError,
    Function,
    ShapeError,
    Tensor,
    as_tensor,
    default_dtype,
    get_default_dtype,
    is_grad_enabled,
    no_grad,
    ones,
    set_default_dtype,
    unbroadcast,
    zeros,
    zeros_like,
)
from . import functional  # noqa: F401
from .gradcheck import gradcheck, max_relative_error, relative_error  # noqa: F401
from .serialization import read_tensor, tensor_to_bytes, write_tensor  # noqa: F401

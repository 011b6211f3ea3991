# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

"""
Tensor payload layout (all fields little-endian)::

    4 bytes   magic  b'RTNS'
    uint8     dtype code (1 = float32, 2 = float64, 3 = int64)
    uint32    rank
    uint64[]  one extent per dimension
    ...       product(extents) scalars in C order
"""

import struct

import numpy as np


TENSOR_MAGIC = b'RTNS'

DTYPE_CODES = {
    np.dtype('float32'): 1,
    np.dtype('float64'): 2,
    np.dtype('int64'): 3,
}
CODE_DTYPES = {code: dtype.newbyteorder('<') for dtype, code in DTYPE_CODES.items()}


def tensor_to_bytes(array):
    array = np.asarray(array)
    dtype = array.dtype.newbyteorder('=')
    if dtype not in DTYPE_CODES:
        raise ValueError('cannot serialize dtype {}'.format(array.dtype))
    code = DTYPE_CODES[dtype]
    header = TENSOR_MAGIC + struct.pack('<BI', code, array.ndim)
    header += struct.pack('<{}Q'.format(array.ndim), *array.shape)
    payload = np.ascontiguousarray(array, dtype=CODE_DTYPES[code]).tobytes(order='C')
    return header + payload


def write_tensor(f, array):
    f.write(tensor_to_bytes(array))


def _read_exact(f, n):
    buf = f.read(n)
    if len(buf) != n:
        raise ValueError('truncated tensor payload (wanted {} bytes, got {})'.format(n, len(buf)))
    return buf


def read_tensor(f):
    magic = _read_exact(f, 4)
    if magic != TENSOR_MAGIC:
        raise ValueError('bad tensor magic {!r}'.format(magic))
    code, rank = struct.unpack('<BI', _read_exact(f, 5))
    if code not in CODE_DTYPES:
        raise ValueError('unknown dtype code {}'.format(code))
    shape = struct.unpack('<{}Q'.format(rank), _read_exact(f, 8 * rank))
    dtype = CODE_DTYPES[code]
    count = int(np.prod(shape)) if rank > 0 else 1
    data = np.frombuffer(_read_exact(f, count * dtype.itemsize), dtype=dtype)
    return data.reshape(shape).astype(dtype.newbyteorder('='))

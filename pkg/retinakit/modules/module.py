# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

from collections import OrderedDict
import math

import numpy as np

from retinakit.autograd import Tensor, get_default_dtype


class Parameter(Tensor):
    """A leaf tensor that always requires gradients."""

    def __init__(self, data, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)

    def __repr__(self):
        return 'Parameter(shape={}, dtype={})'.format(self.shape, self.dtype)


class Module(object):
    """Base class for all network components.

    Attributes holding a :class:`Parameter` or a :class:`Module` are registered
    in assignment order, which fixes the order of :meth:`named_parameters`
    and therefore of checkpoint payloads.
    """

    def __init__(self):
        object.__setattr__(self, '_parameters', OrderedDict())
        object.__setattr__(self, '_modules', OrderedDict())
        object.__setattr__(self, 'training', True)

    def __setattr__(self, name, value):
        if isinstance(value, Parameter):
            self._modules.pop(name, None)
            self._parameters[name] = value
        elif isinstance(value, Module):
            self._parameters.pop(name, None)
            self._modules[name] = value
        elif name in self._parameters and value is None:
            self._parameters[name] = None
        object.__setattr__(self, name, value)

    def register_parameter(self, name, param):
        if param is not None and not isinstance(param, Parameter):
            raise ValueError('cannot register {} as parameter {}'.format(type(param), name))
        self._parameters[name] = param
        object.__setattr__(self, name, param)

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def children(self):
        return iter(self._modules.values())

    def named_modules(self, prefix=''):
        yield prefix, self
        for name, module in self._modules.items():
            sub = prefix + '.' + name if prefix else name
            for item in module.named_modules(sub):
                yield item

    def named_parameters(self, prefix=''):
        for name, param in self._parameters.items():
            if param is not None:
                yield (prefix + '.' + name if prefix else name), param
        for name, module in self._modules.items():
            sub = prefix + '.' + name if prefix else name
            for item in module.named_parameters(sub):
                yield item

    def parameters(self):
        for _, param in self.named_parameters():
            yield param

    def num_parameters(self):
        return sum(p.size for p in self.parameters())

    def state_dict(self):
        return OrderedDict((name, p.data.copy()) for name, p in self.named_parameters())

    def load_state_dict(self, state_dict, strict=True):
        own = OrderedDict(self.named_parameters())
        missing = [k for k in own if k not in state_dict]
        unexpected = [k for k in state_dict if k not in own]
        if strict and (missing or unexpected):
            raise ValueError('state dict mismatch: missing {}, unexpected {}'.format(missing, unexpected))
        for name, param in own.items():
            if name not in state_dict:
                continue
            value = np.asarray(state_dict[name])
            if value.shape != param.shape:
                raise ValueError('size mismatch for {}: checkpoint {} vs model {}'.format(
                    name, value.shape, param.shape))
            param.data[...] = value

    def train(self, mode=True):
        object.__setattr__(self, 'training', mode)
        for module in self.children():
            module.train(mode)
        return self

    def eval(self):
        return self.train(False)

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def extra_repr(self):
        return ''

    def __repr__(self):
        lines = [self.__class__.__name__ + '(' + self.extra_repr()]
        for name, module in self._modules.items():
            sub = repr(module).replace('\n', '\n  ')
            lines.append('  ({}): {}'.format(name, sub))
        if len(lines) == 1:
            return lines[0] + ')'
        return '\n'.join(lines) + '\n)'


class ModuleList(Module):

    def __init__(self, modules=None):
        super().__init__()
        for module in modules or []:
            self.append(module)

    def append(self, module):
        setattr(self, str(len(self._modules)), module)
        return self

    def __getitem__(self, idx):
        return list(self._modules.values())[idx]

    def __iter__(self):
        return iter(self._modules.values())

    def __len__(self):
        return len(self._modules)


# initializers draw from the global NumPy generator; seed it with ``data_utils.numpy_seed``

def _fans(shape):
    if len(shape) < 2:
        return shape[0], shape[0]
    receptive = int(np.prod(shape[2:])) if len(shape) > 2 else 1
    return shape[1] * receptive, shape[0] * receptive


def xavier_uniform(shape):
    fan_in, fan_out = _fans(shape)
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return Parameter(np.random.uniform(-bound, bound, size=shape).astype(get_default_dtype()))


def kaiming_uniform(shape, negative_slope=0.2):
    fan_in, _ = _fans(shape)
    bound = math.sqrt(6.0 / ((1 + negative_slope ** 2) * fan_in))
    return Parameter(np.random.uniform(-bound, bound, size=shape).astype(get_default_dtype()))


def normal(shape, std=0.02):
    return Parameter(np.random.normal(0, std, size=shape).astype(get_default_dtype()))


def constant(shape, value=0.):
    return Parameter(np.full(shape, value, dtype=get_default_dtype()))

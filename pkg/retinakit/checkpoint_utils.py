# Copyright (c) 2024-present, the retinakit authors.
# All rights reserved.
#
# This source code is licensed under the license found in the LICENSE file in
# the root directory of this source tree.

"""
Checkpoint file layout (little-endian)::

    4 bytes   magic  b'RKCK'
    uint32    format version
    uint32    header length in bytes
    ...       UTF-8 JSON header
    ...       one tensor payload (see ``retinakit.autograd.serialization``)
              per entry of ``header['tensors']``, in that order

Arrays nested anywhere in the saved state are replaced in the header by
``{"__tensor__": name}`` placeholders.
"""

import argparse
from collections import OrderedDict
import hashlib
import io
import json
import os
import struct

import numpy as np

from retinakit import utils
from retinakit.autograd import read_tensor, tensor_to_bytes
from retinakit.data import DataError


CHECKPOINT_MAGIC = b'RKCK'
CHECKPOINT_VERSION = 1


def _jsonable(value):
    if isinstance(value, (str, bool, int, float)) or value is None:
        return value
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    return str(value)


def args_to_dict(args):
    return OrderedDict((k, _jsonable(v)) for k, v in sorted(vars(args).items()))


def flatten_state(state, prefix=''):
    """Split *state* into a JSON-compatible skeleton and the arrays it holds."""
    tensors = OrderedDict()

    def _walk(value, path):
        if isinstance(value, np.ndarray):
            tensors[path] = value
            return {'__tensor__': path}
        if isinstance(value, dict):
            return OrderedDict((str(k), _walk(v, '{}.{}'.format(path, k) if path else str(k)))
                               for k, v in value.items())
        if isinstance(value, (list, tuple)):
            return [_walk(v, '{}.{}'.format(path, i) if path else str(i)) for i, v in enumerate(value)]
        return _jsonable(value)

    return _walk(state, prefix), tensors


def unflatten_state(skeleton, tensors):
    if isinstance(skeleton, dict):
        if set(skeleton.keys()) == {'__tensor__'}:
            return tensors[skeleton['__tensor__']]
        return OrderedDict((k, unflatten_state(v, tensors)) for k, v in skeleton.items())
    if isinstance(skeleton, list):
        return [unflatten_state(v, tensors) for v in skeleton]
    return skeleton


def model_checksum(model_or_state_dict):
    """SHA-256 over the serialized parameters, in registration order."""
    if hasattr(model_or_state_dict, 'named_parameters'):
        items = ((k, p.data) for k, p in model_or_state_dict.named_parameters())
    else:
        items = model_or_state_dict.items()
    h = hashlib.sha256()
    for name, value in items:
        h.update(name.encode('utf-8'))
        h.update(tensor_to_bytes(value))
    return h.hexdigest()


def checkpoint_to_bytes(state):
    """Serialize a checkpoint dict (as built by :func:`save_state`)."""
    model = state['model']
    body = OrderedDict((k, v) for k, v in state.items() if k not in ('args', 'model', 'arch', 'stage'))
    skeleton, tensors = flatten_state(body)
    model_names = ['model.' + k for k in model]
    header = OrderedDict([
        ('args', args_to_dict(state['args']) if state['args'] is not None else None),
        ('arch', state.get('arch')),
        ('stage', state.get('stage')),
        ('checksum', model_checksum(model)),
        ('model', list(model.keys())),
        ('state', skeleton),
        ('tensors', model_names + list(tensors.keys())),
    ])
    raw = json.dumps(header).encode('utf-8')

    buf = io.BytesIO()
    buf.write(CHECKPOINT_MAGIC)
    buf.write(struct.pack('<II', CHECKPOINT_VERSION, len(raw)))
    buf.write(raw)
    for value in model.values():
        buf.write(tensor_to_bytes(value))
    for value in tensors.values():
        buf.write(tensor_to_bytes(value))
    return buf.getvalue()


def _write_bytes(data, filename):
    tmp = filename + '.tmp'
    with open(tmp, 'wb') as f:
        f.write(data)
    os.replace(tmp, filename)


def persistent_save(state, filename):
    utils.persistent_write(_write_bytes, checkpoint_to_bytes(state), filename)


def save_state(filename, args, model, criterion, optimizers, lr_scheduler,
               num_updates, optim_history=None, extra_state=None):
    if optim_history is None:
        optim_history = []
    if extra_state is None:
        extra_state = {}
    state_dict = {
        'args': args,
        'arch': getattr(args, 'arch', None),
        'stage': model.stage,
        'model': model.state_dict(),
        'optimizer_history': optim_history + [
            {
                'criterion_name': criterion.__class__.__name__,
                'optimizer_name': optimizers[0].__class__.__name__,
                'lr_scheduler_state': lr_scheduler.state_dict(),
                'num_updates': num_updates,
            }
        ],
        'last_optimizer_state': [opt.state_dict() for opt in optimizers],
        'extra_state': extra_state,
    }
    persistent_save(state_dict, filename)
    return state_dict


def load_checkpoint_to_cpu(path):
    """Read a checkpoint file into the dict layout written by :func:`save_state`.

    ``args`` comes back as an :class:`argparse.Namespace`.
    """
    if not os.path.exists(path):
        raise FileNotFoundError('checkpoint not found: {}'.format(path))
    with open(path, 'rb') as f:
        magic = f.read(4)
        if magic != CHECKPOINT_MAGIC:
            raise DataError('{} is not a retinakit checkpoint (magic {!r})'.format(path, magic))
        version, header_len = struct.unpack('<II', f.read(8))
        if version != CHECKPOINT_VERSION:
            raise DataError('{}: unsupported checkpoint version {}'.format(path, version))
        try:
            header = json.loads(f.read(header_len).decode('utf-8'), object_pairs_hook=OrderedDict)
            tensors = OrderedDict((name, read_tensor(f)) for name in header['tensors'])
        except ValueError as e:
            raise DataError('{}: corrupt checkpoint ({})'.format(path, e))

    model = OrderedDict((k, tensors.pop('model.' + k)) for k in header['model'])
    if model_checksum(model) != header['checksum']:
        raise DataError('{}: parameter checksum mismatch'.format(path))
    state = unflatten_state(header['state'], tensors)
    state['args'] = argparse.Namespace(**header['args']) if header['args'] is not None else None
    state['arch'] = header['arch']
    state['stage'] = header['stage']
    state['checksum'] = header['checksum']
    state['model'] = model
    return state


def load_submodule(module, path, stages, prefix_by_stage=None):
    """Initialize *module* from the parameters of a checkpoint whose stage is
    one of *stages*, keeping only the names under the stage's prefix."""
    state = load_checkpoint_to_cpu(path)
    if state['stage'] not in stages:
        raise ValueError('{} holds a {} model, expected one of {}'.format(path, state['stage'], stages))
    prefix = (prefix_by_stage or {}).get(state['stage'], '')
    params = OrderedDict(
        (k[len(prefix):], v) for k, v in state['model'].items() if k.startswith(prefix)
    )
    module.load_state_dict(params)
    print('| loaded {} parameters from {}'.format(len(params), path), flush=True)
    return state


def load_model_for_inference(path, task=None, arg_overrides=None):
    """Rebuild the model stored in *path*.

    Returns the model (in eval mode, with ``num_updates`` restored), the
    task, and the checkpoint dict.
    """
    from retinakit import tasks

    state = load_checkpoint_to_cpu(path)
    args = state['args']
    for k, v in (arg_overrides or {}).items():
        setattr(args, k, v)
    # parameters come from this checkpoint, not from the prerequisite ones
    args.load_pretrained = False
    if task is None:
        task = tasks.setup_task(args)
    model = task.build_model(args)
    model.load_state_dict(state['model'], strict=True)
    model.num_updates = state['optimizer_history'][-1]['num_updates']
    model.eval()
    return model, task, state


def save_checkpoint(args, trainer, epoch_itr, val_loss):
    if args.no_save:
        return
    epoch = epoch_itr.epoch

    checkpoint_conds = OrderedDict()
    checkpoint_conds['checkpoint{}.pt'.format(epoch)] = (
        not args.no_epoch_checkpoints and epoch % args.save_interval == 0
    )
    checkpoint_conds['checkpoint_best.pt'] = (
        val_loss is not None and
        (not hasattr(save_checkpoint, 'best') or val_loss < save_checkpoint.best)
    )
    checkpoint_conds['checkpoint_last.pt'] = True

    prev_best = getattr(save_checkpoint, 'best', val_loss)
    if val_loss is not None:
        save_checkpoint.best = min(val_loss, prev_best)
    extra_state = {
        'train_iterator': epoch_itr.state_dict(),
        'val_loss': val_loss,
    }
    if hasattr(save_checkpoint, 'best'):
        extra_state.update({'best': save_checkpoint.best})

    os.makedirs(args.save_dir, exist_ok=True)
    checkpoints = [os.path.join(args.save_dir, fn) for fn, cond in checkpoint_conds.items() if cond]
    for cp in checkpoints:
        trainer.save_checkpoint(cp, extra_state)

    if args.keep_last_epochs > 0:
        # remove old epoch checkpoints; checkpoints are sorted in descending order
        checkpoints = utils.checkpoint_paths(args.save_dir, pattern=r'checkpoint(\d+)\.pt')
        for old_chk in checkpoints[args.keep_last_epochs:]:
            if os.path.lexists(old_chk):
                os.remove(old_chk)


def load_checkpoint(args, trainer, epoch_itr):
    """Load a checkpoint and replay the batch iterator to match."""
    os.makedirs(args.save_dir, exist_ok=True)
    if os.path.isabs(args.restore_file):
        checkpoint_path = args.restore_file
    else:
        checkpoint_path = os.path.join(args.save_dir, args.restore_file)
    if os.path.isfile(checkpoint_path):
        extra_state = trainer.load_checkpoint(checkpoint_path, args.reset_optimizer, args.reset_lr_scheduler)
        if extra_state is not None:
            epoch_itr.load_state_dict(extra_state['train_iterator'])
            print('| loaded checkpoint {} (epoch {} @ {} updates)'.format(
                checkpoint_path, epoch_itr.epoch, trainer.get_num_updates()), flush=True)
            trainer.lr_step(epoch_itr.epoch)
            if 'best' in extra_state:
                save_checkpoint.best = extra_state['best']
        return True
    print('| no existing checkpoint found {}'.format(checkpoint_path), flush=True)
    return False

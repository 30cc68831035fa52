"""
Training and tiled inference.

Optimization follows the usual recipe for transformer segmentation models:
Adam with decoupled weight decay, a poly learning-rate schedule and
pixel-wise cross-entropy that skips the ignore label. After every epoch the
held-out tiles are scored and the best checkpoint is kept.
"""

__author__ = "hxseg developers"
__copyright__ = "Copyright 2026, hxseg developers"
__license__ = "BSD 3-clause"

from collections import OrderedDict
import dataclasses
from dataclasses import dataclass
import logging

import numpy as np
import pandas as pd

from hxseg import ConfigError, NumericalError, ShapeError
from hxseg.autograd import as_tensor, no_grad, Tensor
from hxseg.autograd import ops
from hxseg.models.checkpoint import Checkpoint
from hxseg.models.network import check_input_shape
from hxseg.utils import format_key_values, format_value, pop_typed
from hxseg.utils.parallel_utils import ordered_map
from hxseg.utils.tile_utils import plan_tiles, stitch

logger = logging.getLogger(__name__)

RUN_LOG_COLUMNS = ['epoch', 'step', 'loss', 'lr', 'val_oa']


@dataclass
class TrainConfig(object):
    """
    Optimization settings.

    Parameters
    ----------
    lr : float
        Base learning rate.
    weight_decay : float
        Decoupled weight decay.
    batch_size : int
        Tiles per optimizer step.
    epochs : int
        Passes over the training tiles.
    power : float
        Poly schedule exponent.
    seed : int
        Shuffling, subsampling and validation-split seed.
    train_fraction : float
        Fraction of labeled training pixels kept per class.
    max_steps : int
        Cap on optimizer steps; 0 means no cap.
    tile : int
        Training and inference tile side.
    overlap : float
        Tile overlap ratio.
    val_fraction : float
        Fraction of training tiles held out for checkpoint selection.
    """
    lr: float = 6e-5
    weight_decay: float = 0.01
    batch_size: int = 4
    epochs: int = 500
    power: float = 0.9
    seed: int = 0
    train_fraction: float = 1.0
    max_steps: int = 0
    tile: int = 128
    overlap: float = 0.5
    val_fraction: float = 0.1

    def validate(self):
        """Raise ConfigError naming the first violated rule."""
        if not self.lr > 0:
            raise ConfigError('lr must be positive, got {}.'.format(self.lr))
        if self.weight_decay < 0:
            raise ConfigError('weight_decay must be non-negative.')
        if self.batch_size < 1:
            raise ConfigError('batch_size must be positive.')
        if self.epochs < 0 or self.max_steps < 0:
            raise ConfigError('epochs and max_steps must be non-negative.')
        if not 0 < self.train_fraction <= 1:
            raise ConfigError('train_fraction must lie in (0, 1], got {}.'
                              .format(self.train_fraction))
        if self.tile < 1:
            raise ConfigError('tile must be positive.')
        if not 0 <= self.overlap < 1:
            raise ConfigError('overlap must lie in [0, 1).')
        if not 0 <= self.val_fraction < 1:
            raise ConfigError('val_fraction must lie in [0, 1).')
        return self

    def to_values(self):
        """Ordered key-value mapping with every field explicit."""
        return OrderedDict((f.name, format_value(getattr(self, f.name)))
                           for f in dataclasses.fields(self))

    @classmethod
    def pop_values(cls, values):
        """
        Build a config from a parsed key-value mapping, removing the keys it
        uses.

        Parameters
        ----------
        values : dict
            Parsed key-value pairs.
        """
        kwargs = {}
        for f in dataclasses.fields(cls):
            kwargs[f.name] = pop_typed(values, f.name, f.type, f.default)
        return cls(**kwargs)


def poly_lr(step, total_steps, config):
    """
    Poly schedule: lr * (1 - step / total_steps) ** power.

    Parameters
    ----------
    step : int
        Steps taken so far.
    total_steps : int
        Scheduled steps.
    config : TrainConfig
        Supplies lr and power.
    """
    if not 0 <= step <= total_steps:
        raise ValueError('Step {} is outside [0, {}].'.format(
            step, total_steps))
    if total_steps == 0:
        return config.lr
    return config.lr * (1. - float(step) / total_steps) ** config.power


def nll_sum(logits, labels, ignore=-1):
    """
    Summed negative log-likelihood over non-ignored pixels.

    Returns (loss Tensor, number of counted pixels).

    Parameters
    ----------
    logits : Tensor
        Logits H x W x K.
    labels : array_like
        Integer labels H x W.
    ignore : int, optional (default -1)
        Label skipped by the loss.
    """
    logits = as_tensor(logits)
    labels = np.asarray(labels)
    if logits.shape[:-1] != labels.shape:
        raise ShapeError('Logits {} do not match labels {}.'.format(
            logits.shape, labels.shape))
    k = logits.shape[-1]
    flat = labels.ravel()
    rows = np.flatnonzero(flat != ignore)
    targets = flat[rows]
    if np.any((targets < 0) | (targets >= k)):
        raise ValueError('Labels must lie in [0, {}) or equal {}.'.format(
            k, ignore))
    log_probs = ops.log_softmax(logits, axis=-1).reshape(-1, k)
    picked = ops.getitem(log_probs, (rows, targets))
    return -ops.sum(picked), len(rows)


def cross_entropy(logits, labels, ignore=-1):
    """
    Mean negative log-softmax of the true class over non-ignored pixels.

    Parameters
    ----------
    logits : Tensor
        Logits H x W x K.
    labels : array_like
        Integer labels H x W.
    ignore : int, optional (default -1)
        Label skipped by the loss.
    """
    total, count = nll_sum(logits, labels, ignore)
    if count == 0:
        raise ValueError('Every pixel is ignored; the loss is undefined.')
    return total / count


class AdamState(object):
    """
    Adam moment estimates.

    Parameters
    ----------
    shapes : list
        Parameter shapes.
    betas : tuple, optional (default (0.9, 0.999))
        Moment decay rates.
    eps : float, optional (default 1e-8)
        Denominator offset.
    """
    def __init__(self, shapes, betas=(0.9, 0.999), eps=1e-8):
        self.m = [np.zeros(shape) for shape in shapes]
        self.v = [np.zeros(shape) for shape in shapes]
        self.betas = betas
        self.eps = eps
        self.step = 0

    @classmethod
    def like(cls, params, **kwargs):
        """
        Zero moments shaped like a list of arrays or tensors.

        Parameters
        ----------
        params : list
            Parameters.
        kwargs : dict, optional
            Passed to the constructor.
        """
        return cls([p.shape if isinstance(p, Tensor) else np.shape(p)
                    for p in params], **kwargs)


def adam_step(params, grads, state, lr, weight_decay):
    """
    One Adam update with bias correction and decoupled weight decay.

    p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p)

    Parameters
    ----------
    params : list of ndarray
        Parameter values, updated in place.
    grads : list of ndarray
        Gradients.
    state : AdamState
        Moments, updated in place.
    lr : float
        Learning rate.
    weight_decay : float
        Decoupled weight decay.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError('Parameters, gradients and moments differ in number.')
    beta1, beta2 = state.betas
    state.step += 1
    correction1 = 1. - beta1 ** state.step
    correction2 = 1. - beta2 ** state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= beta1
        m += (1. - beta1) * g
        v *= beta2
        v += (1. - beta2) * g * g
        update = (m / correction1) / (np.sqrt(v / correction2) + state.eps)
        p -= (lr * (update + weight_decay * p)).astype(p.dtype)
    return params, state


class RunLog(object):
    """
    Append-only training log.

    Header lines '# key = value' echo the effective config, '# warning: '
    lines carry data warnings and each epoch adds 'epoch,step,loss,lr,val_oa'.
    Per-step losses are kept in memory only.
    """
    def __init__(self):
        self.lines = []
        self.records = []
        self.step_losses = []

    def header(self, values):
        """
        Echo configuration values.

        Parameters
        ----------
        values : dict
            Ordered key-value pairs.
        """
        text = format_key_values(values).rstrip('\n')
        self.lines.extend('# ' + line for line in text.split('\n'))

    def warning(self, message):
        """
        Record a warning.

        Parameters
        ----------
        message : str
            Warning text.
        """
        self.lines.append('# warning: {}'.format(message))

    def step(self, loss):
        """
        Record the loss of one optimizer step.

        Parameters
        ----------
        loss : float
            Batch loss.
        """
        self.step_losses.append(float(loss))

    def epoch(self, epoch, step, loss, lr, val_oa):
        """
        Record one epoch.

        Parameters
        ----------
        epoch : int
            Epoch number (1-based).
        step : int
            Optimizer steps taken so far.
        loss : float
            Mean training loss over the epoch.
        lr : float
            Learning rate of the last step.
        val_oa : float
            Validation overall accuracy.
        """
        self.records.append((epoch, step, loss, lr, val_oa))
        self.lines.append('{},{},{!r},{!r},{!r}'.format(
            epoch, step, float(loss), float(lr), float(val_oa)))

    def losses(self):
        """Per-epoch losses."""
        return [record[2] for record in self.records]

    def to_text(self):
        return '\n'.join(self.lines) + '\n'

    def write(self, filename):
        """
        Write the log.

        Parameters
        ----------
        filename : str
            Output filename.
        """
        with open(filename, 'w') as f:
            f.write(self.to_text())


def read_run_log(filename):
    """
    Epoch records of a run log as a DataFrame.

    Parameters
    ----------
    filename : str
        Run log filename.
    """
    return pd.read_csv(filename, comment='#', header=None,
                       names=RUN_LOG_COLUMNS)


def tile_accuracy(model, tiles, ignore=-1):
    """
    Pixel accuracy of argmax predictions over non-ignored tile pixels.
    The model is scored in inference mode and returned to its previous mode.

    Parameters
    ----------
    model : SegmentationNetwork
        Model.
    tiles : list
        Tiles with hsi, x and labels fields.
    ignore : int, optional (default -1)
        Ignore label.
    """
    correct, total = 0, 0
    was_training = model.training
    model.eval()
    try:
        with no_grad():
            for tile in tiles:
                pred = model(tile.hsi, tile.x).numpy().argmax(axis=-1)
                mask = tile.labels != ignore
                correct += int(np.sum(pred[mask] == tile.labels[mask]))
                total += int(np.sum(mask))
    finally:
        model.train(was_training)
    if total == 0:
        raise ValueError('No labeled pixels to score.')
    return correct / float(total)


def schedule_length(n_tiles, config):
    """
    Optimizer steps the schedule runs over.

    Parameters
    ----------
    n_tiles : int
        Training tiles.
    config : TrainConfig
        Training config.
    """
    per_epoch = -(-n_tiles // config.batch_size)
    total = per_epoch * config.epochs
    if config.max_steps:
        total = min(total, config.max_steps)
    return total


def train(model, tiles, config, val_tiles=None, log=None, ignore=-1):
    """
    Train a model and return the checkpoint with the best validation OA.
    Steps run in training mode; the model is left in inference mode.

    Parameters
    ----------
    model : SegmentationNetwork
        Model, trained in place.
    tiles : list
        Training tiles.
    config : TrainConfig
        Training config.
    val_tiles : list, optional
        Held-out tiles; training tiles are scored when absent or empty.
    log : RunLog, optional
        Run log receiving one line per epoch.
    ignore : int, optional (default -1)
        Ignore label.
    """
    config.validate()
    if not len(tiles):
        raise ValueError('No training tiles.')
    if log is None:
        log = RunLog()
    score_tiles = val_tiles if val_tiles else tiles
    params = model.parameters()
    state = AdamState.like(params)
    rng = np.random.RandomState(config.seed)
    total_steps = schedule_length(len(tiles), config)
    best = Checkpoint.from_model(model)
    step, lr = 0, config.lr
    model.train()
    for epoch in range(1, config.epochs + 1):
        if step >= total_steps:
            break
        order = rng.permutation(len(tiles))
        losses = []
        for start in range(0, len(order), config.batch_size):
            if step >= total_steps:
                break
            batch = [tiles[i] for i in order[start:start + config.batch_size]]
            model.zero_grad()
            total, count = None, 0
            for tile in batch:
                nll, n = nll_sum(model(tile.hsi, tile.x), tile.labels, ignore)
                total = nll if total is None else total + nll
                count += n
            if count == 0:
                continue
            loss = total / count
            value = loss.item()
            if not np.isfinite(value):
                raise NumericalError('Non-finite loss {} at epoch {}, step {}.'
                                     .format(value, epoch, step + 1))
            loss.backward()
            lr = poly_lr(step, total_steps, config)
            adam_step([p.data for p in params], [p.grad for p in params],
                      state, lr, config.weight_decay)
            step += 1
            losses.append(value)
            log.step(value)
        val_oa = tile_accuracy(model, score_tiles, ignore)
        mean_loss = float(np.mean(losses)) if losses else float('nan')
        log.epoch(epoch, step, mean_loss, lr, val_oa)
        logger.info('epoch %d step %d loss %.4f lr %.3g val_oa %.4f', epoch,
                    step, mean_loss, lr, val_oa)
        if val_oa > best.best_val_oa or best.best_epoch < 0:
            best = Checkpoint.from_model(model, epoch, val_oa)
    model.eval()
    return best


def predict_scene(model, hsi, x, tile, overlap=0.5, threads=1):
    """
    Tiled full-scene logits, stitched by averaging overlaps.
    The model is switched to inference mode, so every tile is normalized
    with the stored running statistics.

    Parameters
    ----------
    model : SegmentationNetwork
        Model.
    hsi : ndarray
        HSI H x W x bands.
    x : ndarray
        X H x W x bands.
    tile : int
        Tile side; must satisfy the model's divisibility constraints.
    overlap : float, optional (default 0.5)
        Tile overlap ratio.
    threads : int, optional (default 1)
        Tiles forwarded concurrently.
    """
    if hsi.shape[:2] != x.shape[:2]:
        raise ShapeError('HSI {} and X {} are not co-registered.'.format(
            hsi.shape, x.shape))
    check_input_shape(model.config, tile, tile)
    height, width = hsi.shape[:2]
    plan = plan_tiles(height, width, tile, overlap)
    logger.info('Predicting %d tiles of %dx%d', len(plan), tile, tile)
    model.eval()

    def forward(origin):
        window = plan.window(origin)
        return origin, model(hsi[window], x[window]).numpy()

    # graph recording is a process-wide switch; set it once for all threads
    with no_grad():
        tiles = ordered_map(forward, plan.origins, threads)
    return stitch(tiles, height, width)

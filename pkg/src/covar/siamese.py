"""Joint Siamese network, its contrastive loss, gradient and trainers.

The joint network feeds sensor-1 inputs through ``net1`` and sensor-2 inputs
through ``net2`` and compares the two d-dimensional outputs with a fixed unit
``logistic(||f1(s1) - f2(s2)||^2)``.  Positive (synchronised) pairs are pulled
towards 1/2 and negative (mixed) pairs towards 1.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import mlp
from .numeric import DimensionError, RngStream, as_matrix, logistic
from .optim import lbfgs

log = logging.getLogger(__name__)

THRESHOLD = 0.75
BELOW_ONE = float(np.nextafter(1.0, 0.0))
CHUNK_ROWS = 2048


class DivergenceError(ArithmeticError):
    """Training produced a non-finite loss."""


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, data, chunk=CHUNK_ROWS, floor=0.0):
        """Per-feature mean and std of ``data``.

        Each std is raised to at least ``floor`` times the root-mean-square std
        over all features, so near-constant features are not blown up into
        noise the network can memorise.
        """
        data = np.asarray(data)
        n, d = data.shape
        total = np.zeros(d)
        for i in range(0, n, chunk):
            total += data[i:i + chunk].sum(axis=0, dtype=np.float64)
        mean = total / n
        sq = np.zeros(d)
        for i in range(0, n, chunk):
            sq += ((data[i:i + chunk].astype(np.float64) - mean) ** 2).sum(axis=0)
        std = np.sqrt(sq / n)
        if floor > 0:
            std = np.maximum(std, floor * np.sqrt(np.mean(std ** 2)))
        # constant features (e.g. always-black pixels) pass through centred only
        std[std < 1e-8] = 1.0
        return cls(mean, std)

    def apply(self, x):
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.scale


@dataclass
class JointNetwork:
    net1: mlp.SubNetwork
    net2: mlp.SubNetwork
    norm1: Standardizer | None = None
    norm2: Standardizer | None = None

    def __post_init__(self):
        if self.net1.output_dim != self.net2.output_dim:
            raise DimensionError(
                f"sub-network outputs differ: {self.net1.output_dim} vs {self.net2.output_dim}")

    @property
    def n_params(self):
        return self.net1.n_params + self.net2.n_params

    def prepare1(self, s1):
        return self.norm1.apply(s1) if self.norm1 is not None else as_matrix(s1)

    def prepare2(self, s2):
        return self.norm2.apply(s2) if self.norm2 is not None else as_matrix(s2)

    def copy(self):
        return JointNetwork(self.net1.copy(), self.net2.copy(), self.norm1, self.norm2)


@dataclass
class LossWeights:
    alpha: float = 1.0
    beta: float = 1.0
    lam: float = 1e-4

    def __post_init__(self):
        if min(self.alpha, self.beta, self.lam) < 0:
            raise ValueError("loss weights must be non-negative")
        if self.alpha == 0 and self.beta == 0 and self.lam == 0:
            raise ValueError("loss weights cannot all be zero")


@dataclass
class SgdConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    batch_size: int = 100
    epochs: int = 30
    keep_probability: float = 1.0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be non-negative")
        if not 0 <= self.momentum < 1:
            raise ValueError("momentum must lie in [0, 1)")
        if self.batch_size < 2:
            raise ValueError("batch_size must be at least 2")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if not 0 < self.keep_probability <= 1:
            raise ValueError("keep_probability must lie in (0, 1]")


@dataclass
class LbfgsConfig:
    history: int = 10
    max_iters: int = 200
    c1: float = 1e-4
    backtrack: float = 0.5

    def __post_init__(self):
        if self.history < 1:
            raise ValueError("history must be >= 1")
        if self.max_iters < 0:
            raise ValueError("max_iters must be non-negative")
        if not 0 < self.c1 < 1 or not 0 < self.backtrack < 1:
            raise ValueError("c1 and backtrack must lie in (0, 1)")


@dataclass
class TrainConfig:
    loss_weights: LossWeights = field(default_factory=LossWeights)
    optimizer: str = "sgd_momentum"
    sgd: SgdConfig = field(default_factory=SgdConfig)
    lbfgs: LbfgsConfig = field(default_factory=LbfgsConfig)
    seed: int = 0

    def __post_init__(self):
        if self.optimizer not in ("sgd_momentum", "lbfgs"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def _pairs(batch):
    """Accept a PairedDataset, an (s1, s2) tuple or None."""
    if batch is None:
        return None, None
    if hasattr(batch, "s1"):
        return batch.s1, batch.s2
    return batch


def _count(batch):
    s1, _ = _pairs(batch)
    return 0 if s1 is None else len(s1)


def joint_forward(jn, s1, s2, masks=None):
    """Return ``(out, dist_sq, (cache1, cache2))`` for a batch of pairs."""
    x1, x2 = jn.prepare1(s1), jn.prepare2(s2)
    if x1.shape[0] != x2.shape[0]:
        raise DimensionError(f"batch sizes differ: {x1.shape[0]} vs {x2.shape[0]}")
    m1, m2 = masks if masks is not None else (None, None)
    c1 = mlp.forward(jn.net1, x1, m1)
    c2 = mlp.forward(jn.net2, x2, m2)
    diff = c1.result - c2.result
    dist_sq = np.einsum("ij,ij->i", diff, diff)
    # logistic rounds to exactly 1.0 once dist_sq exceeds ~37; keep scores below 1
    return np.minimum(logistic(dist_sq), BELOW_ONE), dist_sq, (c1, c2)


def encode(jn, data, sensor, chunk=CHUNK_ROWS):
    """Apply f1 (sensor 1) or f2 (sensor 2) row-chunk by row-chunk."""
    net, prep = (jn.net1, jn.prepare1) if sensor == 1 else (jn.net2, jn.prepare2)
    out = [mlp.forward(net, prep(data[i:i + chunk])).result for i in range(0, len(data), chunk)]
    return np.vstack(out) if out else np.zeros((0, net.output_dim))


def pair_scores(jn, s1, s2, chunk=CHUNK_ROWS):
    out = [joint_forward(jn, s1[i:i + chunk], s2[i:i + chunk])[0] for i in range(0, len(s1), chunk)]
    return np.concatenate(out) if out else np.zeros(0)


def predict_pair(jn, s1, s2):
    """Score pairs; ``is_positive`` iff score < 0.75 (ties are negative)."""
    scores = pair_scores(jn, as_matrix(s1), as_matrix(s2))
    return scores, scores < THRESHOLD


def _weight_penalty(jn):
    return sum(float(np.sum(l.weights ** 2)) for net in (jn.net1, jn.net2) for l in net.layers)


def _data_term(jn, s1, s2, target, coef, masks=None, with_grad=True):
    """Loss ``sum(coef * (target - sigma(d))^2)`` over one chunk, plus grads."""
    out, dist_sq, (c1, c2) = joint_forward(jn, s1, s2, masks)
    resid = target - out
    loss = float(np.sum(coef * resid * resid))
    if not with_grad:
        return loss, None
    dd = -2.0 * coef * resid * out * logistic(-dist_sq)
    diff = c1.result - c2.result
    g_out = 2.0 * dd[:, None] * diff
    g1, _ = mlp.backward(jn.net1, c1, g_out)
    g2, _ = mlp.backward(jn.net2, c2, -g_out)
    return loss, (g1, g2)


def _add_grads(acc, new):
    if acc is None:
        return [[(dw.copy(), db.copy()) for dw, db in side] for side in new]
    for side_acc, side_new in zip(acc, new):
        for k, (dw, db) in enumerate(side_new):
            side_acc[k][0][...] += dw
            side_acc[k][1][...] += db
    return acc


def siamese_loss_and_grad(jn, pos, neg, w, masks=None, with_grad=True, chunk=CHUNK_ROWS):
    """Contrastive loss and (optionally) its gradient for both sub-networks.

    ``masks`` is an optional ``(mask1, mask2)`` pair of dropout masks covering
    the positive rows followed by the negative rows.  Gradients come back as
    ``(grads1, grads2)``, each a list of ``(dW, db)``.
    """
    n_pos, n_neg = _count(pos), _count(neg)
    if n_pos == 0 and n_neg == 0:
        raise ValueError("both positive and negative batches are empty")
    blocks = []
    if n_pos:
        blocks.append((*_pairs(pos), 0.5, w.alpha / n_pos))
    if n_neg:
        blocks.append((*_pairs(neg), 1.0, w.beta / n_neg))
    loss, grads, offset = 0.0, None, 0
    for s1, s2, target, coef in blocks:
        if masks is not None:
            # dropout batches are small; keep them whole so masks line up
            m = tuple(mlp.DropoutMask([a[offset:offset + len(s1)] for a in mk.masks],
                                      mk.keep_probability) for mk in masks)
            spans = [(0, len(s1), m)]
        else:
            spans = [(i, min(i + chunk, len(s1)), None) for i in range(0, len(s1), chunk)]
        for lo, hi, m in spans:
            part, g = _data_term(jn, s1[lo:hi], s2[lo:hi], target, coef, m, with_grad)
            loss += part
            if with_grad:
                grads = _add_grads(grads, g)
        offset += len(s1)
    loss += w.lam * _weight_penalty(jn)
    if not with_grad:
        return loss, None
    for side, net in zip(grads, (jn.net1, jn.net2)):
        for k, layer in enumerate(net.layers):
            side[k][0][...] += 2.0 * w.lam * layer.weights
    return loss, (grads[0], grads[1])


def siamese_loss(jn, pos, neg, w):
    return siamese_loss_and_grad(jn, pos, neg, w, with_grad=False)[0]


def siamese_grad(jn, pos, neg, w, masks=None):
    return siamese_loss_and_grad(jn, pos, neg, w, masks=masks)[1]


def get_params(jn):
    return np.concatenate([mlp.get_params(jn.net1), mlp.get_params(jn.net2)])


def set_params(jn, theta):
    k = jn.net1.n_params
    return JointNetwork(mlp.set_params(jn.net1, theta[:k]), mlp.set_params(jn.net2, theta[k:]),
                        jn.norm1, jn.norm2)


def flatten_grads(grads):
    return np.concatenate([mlp.flatten_grads(grads[0]), mlp.flatten_grads(grads[1])])


def _check_finite(loss, where):
    if not math.isfinite(loss):
        raise DivergenceError(f"non-finite loss {loss} {where}")


def _take(batch, idx):
    s1, s2 = _pairs(batch)
    return s1[idx], s2[idx]


def train_sgd(jn, pos, neg, cfg, log_every=1):
    """Minibatch SGD with momentum and dropout.

    Each step draws ``batch_size // 2`` positives and as many negatives; an
    epoch walks the larger set once (the smaller one wraps around).  Returns
    the trained network and the full-data loss after every epoch.
    """
    n_pos, n_neg = _count(pos), _count(neg)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("train_sgd needs non-empty positive and negative sets")
    opt, w = cfg.sgd, cfg.loss_weights
    stream = RngStream(cfg.seed)
    half = opt.batch_size // 2
    jn = jn.copy()
    theta = get_params(jn)
    velocity = np.zeros_like(theta)
    steps = math.ceil(max(n_pos, n_neg) / half)
    losses = []
    for epoch in range(opt.epochs):
        order_pos = np.resize(stream.permutation(n_pos), steps * half)
        order_neg = np.resize(stream.permutation(n_neg), steps * half)
        for k in range(steps):
            bp = _take(pos, np.sort(order_pos[k * half:(k + 1) * half]))
            bn = _take(neg, np.sort(order_neg[k * half:(k + 1) * half]))
            masks = None
            if opt.keep_probability < 1.0:
                masks = (mlp.sample_dropout_mask(jn.net1, opt.keep_probability, stream, 2 * half),
                         mlp.sample_dropout_mask(jn.net2, opt.keep_probability, stream, 2 * half))
            loss, grads = siamese_loss_and_grad(jn, bp, bn, w, masks=masks)
            _check_finite(loss, f"at epoch {epoch} step {k}")
            velocity = opt.momentum * velocity - opt.learning_rate * flatten_grads(grads)
            theta = theta + velocity
            jn = set_params(jn, theta)
        full = siamese_loss(jn, pos, neg, w)
        _check_finite(full, f"after epoch {epoch}")
        losses.append(full)
        if log_every and (epoch + 1) % log_every == 0:
            log.info("epoch %d loss %.6f", epoch + 1, full)
    return jn, losses


def train_lbfgs(jn, pos, neg, cfg):
    """Full-batch L-BFGS on the contrastive loss (no dropout).

    Returns the trained network, the loss after every iteration and the
    optimizer result (its ``status`` and accepted line-search steps).
    """
    if _count(pos) == 0 and _count(neg) == 0:
        raise ValueError("train_lbfgs needs data")
    opt, w = cfg.lbfgs, cfg.loss_weights
    template = jn.copy()

    def objective(theta):
        net = set_params(template, theta)
        loss, grads = siamese_loss_and_grad(net, pos, neg, w)
        return loss, flatten_grads(grads)

    def report(it, theta, f):
        if not math.isfinite(f):
            raise DivergenceError(f"non-finite loss {f} at iteration {it}")
        log.info("iteration %d loss %.6f", it + 1, f)

    res = lbfgs(objective, get_params(template), history=opt.history, max_iters=opt.max_iters,
                c1=opt.c1, backtrack=opt.backtrack, gtol=1e-6, callback=report)
    _check_finite(res.f, "at the L-BFGS starting point")
    return set_params(template, res.x), list(res.trajectory), res


def train(jn, pos, neg, cfg):
    """Dispatch on ``cfg.optimizer``; returns ``(network, loss trajectory)``."""
    if cfg.optimizer == "lbfgs":
        net, losses, _ = train_lbfgs(jn, pos, neg, cfg)
        return net, losses
    return train_sgd(jn, pos, neg, cfg)

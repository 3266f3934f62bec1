"""Greedy layer-wise denoising-autoencoder pretraining with a sparsity penalty.

Each hidden layer is trained as the encoder of a one-hidden-layer autoencoder
(logistic code, linear reconstruction) that rebuilds its clean input from a
masked copy.  The loss is

    1/(2n) * sum ||x_hat - x||^2  +  w * sum_j KL(rho || rho_hat_j)

with ``rho_hat_j`` the batch-mean activation of code unit j.  The code is
always logistic during pretraining so ``rho_hat`` lies in (0, 1); the trained
weights are then handed back to the layer, which keeps its own activation.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import mlp
from .numeric import RngStream, as_matrix, logistic

log = logging.getLogger(__name__)

RHO_EPS = 1e-8


@dataclass
class DaeConfig:
    corruption_probability: float = 0.3
    sparsity_target: float = 0.1
    sparsity_weight: float = 0.1
    epochs: int = 5
    learning_rate: float = 0.05
    batch_size: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.corruption_probability < 1:
            raise ValueError("corruption_probability must lie in [0, 1)")
        if not 0 < self.sparsity_target < 1:
            raise ValueError("sparsity_target must lie in (0, 1)")
        if self.sparsity_weight < 0:
            raise ValueError("sparsity_weight must be non-negative")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")


def corrupt(x, p, stream):
    """Masking noise: zero each entry independently with probability ``p``."""
    if not 0 <= p < 1:
        raise ValueError(f"corruption probability must lie in [0, 1), got {p}")
    x = as_matrix(x)
    if p == 0:
        return x.copy()
    return x * (stream.uniform(x.shape) >= p)


def kl_divergence(rho, rho_hat):
    """Bernoulli KL(rho || rho_hat), elementwise."""
    rho_hat = np.asarray(rho_hat, dtype=np.float64)
    return rho * np.log(rho / rho_hat) + (1 - rho) * np.log((1 - rho) / (1 - rho_hat))


def dae_loss_grad(encoder, decoder, clean, corrupted, cfg):
    """Loss and exact gradients ``(loss, (dWe, dbe), (dWd, dbd))``.

    ``rho_hat`` is clamped to [1e-8, 1 - 1e-8]; the gradient treats the clamp
    as the identity.
    """
    clean, corrupted = as_matrix(clean), as_matrix(corrupted)
    n = clean.shape[0]
    h = logistic(corrupted @ encoder.weights.T + encoder.biases)
    recon = h @ decoder.weights.T + decoder.biases
    err = recon - clean
    rho = cfg.sparsity_target
    rho_hat = np.clip(h.mean(axis=0), RHO_EPS, 1 - RHO_EPS)
    loss = 0.5 * float(np.sum(err * err)) / n
    loss += cfg.sparsity_weight * float(np.sum(kl_divergence(rho, rho_hat)))
    d_recon = err / n
    grad_dec = (d_recon.T @ h, d_recon.sum(axis=0))
    d_h = d_recon @ decoder.weights
    d_h += cfg.sparsity_weight * (-rho / rho_hat + (1 - rho) / (1 - rho_hat)) / n
    d_z = d_h * h * (1 - h)
    grad_enc = (d_z.T @ corrupted, d_z.sum(axis=0))
    return loss, grad_enc, grad_dec


def reconstruction_loss(encoder, decoder, data):
    data = as_matrix(data)
    h = logistic(data @ encoder.weights.T + encoder.biases)
    err = h @ decoder.weights.T + decoder.biases - data
    return 0.5 * float(np.sum(err * err)) / data.shape[0]


def train_dae(encoder, data, cfg, stream):
    """SGD on one autoencoder; returns ``(encoder, decoder, losses per epoch)``."""
    enc = mlp.LayerParams(encoder.weights.copy(), encoder.biases.copy(), "logistic")
    dec = mlp.init_weights([enc.out_dim, enc.in_dim], stream.split(0), ["linear"]).layers[0]
    n = data.shape[0]
    losses = []
    for epoch in range(cfg.epochs):
        order = stream.permutation(n)
        for lo in range(0, n, cfg.batch_size):
            batch = data[np.sort(order[lo:lo + cfg.batch_size])]
            noisy = corrupt(batch, cfg.corruption_probability, stream)
            loss, (dwe, dbe), (dwd, dbd) = dae_loss_grad(enc, dec, batch, noisy, cfg)
            if not np.isfinite(loss):
                raise ArithmeticError(f"non-finite pretraining loss at epoch {epoch}")
            enc.weights -= cfg.learning_rate * dwe
            enc.biases -= cfg.learning_rate * dbe
            dec.weights -= cfg.learning_rate * dwd
            dec.biases -= cfg.learning_rate * dbd
        losses.append(loss)
    return enc, dec, losses


def pretrain_stack(net, data, cfg, chunk=2048):
    """Pretrain every hidden layer of ``net`` greedily; the output layer is kept.

    ``data`` holds the (already prepared) network inputs.  Layer k is trained
    on the clean outputs of layers 0..k-1 of the partially pretrained network.
    """
    if len(net.layers) < 2:
        raise ValueError("pretraining needs at least one hidden layer")
    net = net.copy()
    if cfg.epochs == 0:
        return net
    stream = RngStream(cfg.seed)
    feats = as_matrix(data)
    for k, layer in enumerate(net.layers[:-1]):
        enc, _, losses = train_dae(layer, feats, cfg, stream.split(k + 1))
        log.info("pretrained layer %d (%d -> %d), last batch loss %.5f",
                 k, layer.in_dim, layer.out_dim, losses[-1])
        net.layers[k] = mlp.LayerParams(enc.weights, enc.biases, layer.activation)
        if k < len(net.layers) - 2:
            feats = np.vstack([mlp.activate(layer.activation,
                                            feats[i:i + chunk] @ enc.weights.T + enc.biases)
                               for i in range(0, len(feats), chunk)])
    return net

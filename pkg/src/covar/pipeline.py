"""End-to-end experiment stages shared by the CLI and the acceptance suite."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from . import embedding, evaluate, mlp, pairing, pretrain, siamese, synthdata
from .numeric import RngStream

log = logging.getLogger(__name__)

# child-stream indices derived from the master seed
DATA_STREAM, SPLIT_STREAM, INIT_STREAM, EVAL_STREAM = 1, 2, 3, 4


@dataclass
class Splits:
    train_pos: pairing.PairedDataset
    train_neg: pairing.PairedDataset
    test_pos: pairing.PairedDataset
    test_neg: pairing.PairedDataset

    def items(self):
        return [("train_pos", self.train_pos), ("train_neg", self.train_neg),
                ("test_pos", self.test_pos), ("test_neg", self.test_neg)]


def load_corpus(cfg):
    if cfg.data.image_dir:
        return synthdata.load_image_directory(cfg.data.image_dir)
    return synthdata.blob_corpus(cfg.data.corpus_size, cfg.data.corpus_seed)


def generate(cfg):
    """Generate positives (and negatives) and split them into train/test."""
    master = RngStream(cfg.seed)
    stream = master.split(DATA_STREAM)
    neg = None
    if cfg.experiment == "two_modalities":
        pos = synthdata.gen_two_modalities(cfg.n_pairs, stream, T=cfg.data.T,
                                           omega_min=cfg.data.omega_min,
                                           omega_max=cfg.data.omega_max)
    elif cfg.experiment == "spinning_sprites":
        pos = synthdata.gen_spinning_sprites(cfg.n_pairs, stream)
    else:
        pos, neg = synthdata.gen_rotation_pairs(cfg.n_pairs, load_corpus(cfg), stream)
    parts = pairing.split(pos, neg, cfg.test_fraction, master.split(SPLIT_STREAM))
    return Splits(*parts)


def init_network(cfg, train_pos):
    """Seeded initial joint network with standardisers fitted on ``train_pos``."""
    stream = RngStream(cfg.seed).split(INIT_STREAM)
    net1 = mlp.init_weights(cfg.net1.dims(train_pos.d1), stream.split(1),
                            cfg.net1.activations(), cfg.net1.output_scale)
    net2 = mlp.init_weights(cfg.net2.dims(train_pos.d2), stream.split(2),
                            cfg.net2.activations(), cfg.net2.output_scale)
    return siamese.JointNetwork(net1, net2,
                                siamese.Standardizer.fit(train_pos.s1, floor=cfg.net1.scale_floor),
                                siamese.Standardizer.fit(train_pos.s2, floor=cfg.net2.scale_floor))


def fit(cfg, splits, initial=None):
    """Optional DAE pretraining followed by the configured trainer."""
    jn = initial if initial is not None else init_network(cfg, splits.train_pos)
    if cfg.pretrain.enabled:
        dae = cfg.pretrain.dae
        net1 = pretrain.pretrain_stack(jn.net1, jn.prepare1(splits.train_pos.s1), dae)
        net2 = pretrain.pretrain_stack(jn.net2, jn.prepare2(splits.train_pos.s2), dae)
        jn = siamese.JointNetwork(net1, net2, jn.norm1, jn.norm2)
    return siamese.train(jn, splits.train_pos, splits.train_neg, cfg.train)


def embed_outputs(jn, ds, method="diffusion", k=2, bandwidth=None, neighbors=None, limit=None):
    """Embed f1(s1) and f2(s2) of ``ds`` jointly.

    Returns ``(coordinates, sensor, hidden_x)`` with sensor-1 rows first.
    """
    if limit is not None and ds.n > limit:
        ds = ds.subset(np.arange(limit))
    out1 = siamese.encode(jn, ds.s1, 1)
    out2 = siamese.encode(jn, ds.s2, 2)
    res = embedding.embed(np.vstack([out1, out2]), method, k, bandwidth, neighbors)
    sensor = np.repeat([1, 2], ds.n)
    hx = None
    if ds.hidden_x is not None:
        hx = np.concatenate([ds.hidden_x, ds.x_sensor2])
    return res.coordinates, sensor, hx


def sensor_separation(coords, sensor):
    """Distance between per-sensor centroids over the pooled coordinate spread.

    The spread is the root-mean-square per-coordinate standard deviation.
    """
    c1 = coords[sensor == 1].mean(axis=0)
    c2 = coords[sensor == 2].mean(axis=0)
    spread = float(np.sqrt(np.mean(coords.var(axis=0))))
    return float(np.linalg.norm(c1 - c2) / spread)


def recovery_score(jn, ds, cfg, limit=None):
    """Circular correlation between true x and the angle of the 2-D diffusion
    embedding of the sensor-1 codes."""
    if limit is not None and ds.n > limit:
        ds = ds.subset(np.arange(limit))
    codes = siamese.encode(jn, ds.s1, 1)
    res = embedding.diffusion_maps(codes, 2, cfg.embedding.bandwidth, cfg.embedding.neighbors)
    angle = evaluate.recovered_angle(res.coordinates)
    return evaluate.circular_correlation(angle, ds.hidden_x)


def evaluate_run(cfg, jn, splits, baseline=None):
    """Build the report dictionary for a trained network."""
    report = {"experiment": cfg.experiment}
    test = evaluate.pair_accuracy(jn, splits.test_pos, splits.test_neg)
    train = evaluate.pair_accuracy(jn, splits.train_pos, splits.train_neg)
    if cfg.experiment == "rotation_invariance":
        encoder = lambda x: siamese.encode(jn, x, 1)  # noqa: E731
        stream = RngStream(cfg.seed).split(EVAL_STREAM)
        _, _, test.invariance_summary = evaluate.invariance_histograms(
            encoder, load_corpus(cfg), cfg.evaluation.invariance_trials, stream)
    if cfg.experiment == "spinning_sprites":
        test.recovery = {"circular_correlation": recovery_score(
            jn, splits.test_pos, cfg, cfg.evaluation.recovery_points)}
    report["test"] = test.to_dict()
    report["train"] = train.to_dict()
    if baseline is not None:
        report["untrained_baseline"] = evaluate.pair_accuracy(
            baseline, splits.test_pos, splits.test_neg).to_dict()
    if cfg.experiment == "two_modalities":
        coords, sensor, _ = embed_outputs(jn, splits.test_pos, "diffusion", 2, cfg.embedding.bandwidth,
                                          cfg.embedding.neighbors, limit=1000)
        report["sensor_separation"] = sensor_separation(coords, sensor)
    return report

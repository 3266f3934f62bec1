"""Common-variable learning from synchronised sensor pairs with Siamese networks."""

from .evaluate import circular_correlation, invariance_histograms, pair_accuracy
from .mlp import SubNetwork, init_weights
from .numeric import RngStream, logistic
from .pairing import PairedDataset, make_negatives, split
from .siamese import (JointNetwork, LossWeights, TrainConfig, joint_forward, predict_pair,
                      siamese_grad, siamese_loss, train_lbfgs, train_sgd)

__version__ = "0.1.0"

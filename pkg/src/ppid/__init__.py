"""Privacy-preserving intrusion detection for SCADA telemetry.

Features are ranked by Pearson correlation, only the top fraction is shown to
a diagonal Gaussian mixture fitted by EM, and the mixture's clusters are
mapped to Normal/Attack for evaluation.
"""

from .correlation import pcc, rank_features, select_quartile
from .dataset import ATTACK, NORMAL, LabeledMatrix
from .detection import DetectorModel, classify, score_dataset
from .gmm import GmmConfig, GmmModel, fit

__version__ = "0.1.0"

__all__ = [
    "ATTACK", "NORMAL", "LabeledMatrix", "pcc", "rank_features", "select_quartile",
    "GmmConfig", "GmmModel", "fit", "DetectorModel", "classify", "score_dataset",
]

"""Wireless channel type recognition from descrambled SRS samples."""

from .channel_sim import ChannelProfile, RxCorrelation, SimConfig, make_standard_profiles, realize_channel
from .dataset import VectorMode, build_sample_matrix, load_dataset, save_dataset, split
from .errors import ConfigurationError, FormatError, TrainingDivergedError, WctLabError
from .labeling import LabelScheme, derive_task_layout, label_to_wct, multi_task_labels, single_task_labels
from .mlp import MlpModel, TrainConfig, init_model, load_model, predict, save_model, train
from .srs import gen_srs, transmit_descramble

__version__ = "0.1.0"

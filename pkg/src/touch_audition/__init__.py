"""Sound-based touch gesture and emotion recognition.

Log-mel DSP front-end, a from-scratch autograd engine, a three-branch
multi-temporal-resolution CNN, static resource analysis, a deterministic
synthetic corpus, and a training/evaluation harness.
"""

from .analysis import build_report, count_flops, count_params, min_input_frames, receptive_field
from .autograd import Tensor, cross_entropy, no_grad
from .data import TASK_CLASSES, read_manifest, write_manifest
from .model import ModelConfig, Mtrcnn, load_checkpoint, save_checkpoint
from .stats import paired_t_test, shapiro_wilk
from .synth import synth_corpus
from .training import TrainSettings, evaluate, length_sweep, run_training

__version__ = "0.1.0"

__all__ = [
    "ModelConfig", "Mtrcnn", "Tensor", "TrainSettings", "TASK_CLASSES",
    "build_report", "count_flops", "count_params", "cross_entropy",
    "evaluate", "length_sweep", "load_checkpoint", "min_input_frames",
    "no_grad", "paired_t_test", "read_manifest", "receptive_field",
    "run_training", "save_checkpoint", "shapiro_wilk", "synth_corpus",
    "write_manifest", "__version__",
]

"""Adversarial training of 3D porous-structure generators.

Trains the fixed generator/discriminator pair on 64-cube gray volumes
and exports weights in the portable G3DW format consumed by the
inference toolkit.
"""

from .config import TrainConfig
from .data import load_dataset, load_volume, unit_from_gray
from .errors import (
    DivergenceError,
    ExportError,
    FormatError,
    ShapeError,
    TrainerError,
    ValidationError,
)
from .g3dw import (
    LayerRecord,
    WeightsFile,
    read_weights_file,
    weights_bytes,
    weights_from_bytes,
    write_weights_file,
)
from .models import (
    Discriminator,
    Generator,
    export_weights,
    init_weights,
    load_model,
    model_from_weights_file,
    weights_file_from_model,
)
from .train import TrainOutputs, round_trip_parity, train

__version__ = "1.0.0"

__all__ = [
    "Discriminator",
    "DivergenceError",
    "ExportError",
    "FormatError",
    "Generator",
    "LayerRecord",
    "ShapeError",
    "TrainConfig",
    "TrainOutputs",
    "TrainerError",
    "ValidationError",
    "WeightsFile",
    "export_weights",
    "init_weights",
    "load_dataset",
    "load_model",
    "load_volume",
    "model_from_weights_file",
    "read_weights_file",
    "round_trip_parity",
    "train",
    "unit_from_gray",
    "weights_bytes",
    "weights_file_from_model",
    "weights_from_bytes",
    "write_weights_file",
]

from .layers import (Conv1D, Dense, Flatten, MaxPool1D, ParallelAdd, Reshape, Sequential,
                     ShapeError, UpSample1D)
from .loss import log_cosh, masked_logcosh_loss
from .model import (MINI_ARCHITECTURE, VARIANTS, Adam, Architecture, AutoencoderModel,
                    TrainConfig, TrainingError, load_autoencoder, rebuild,
                    save_autoencoder, train_autoencoder)

__all__ = [
    "Conv1D", "Dense", "Flatten", "MaxPool1D", "ParallelAdd", "Reshape", "Sequential",
    "ShapeError", "UpSample1D", "log_cosh", "masked_logcosh_loss", "MINI_ARCHITECTURE",
    "VARIANTS", "Adam", "Architecture", "AutoencoderModel", "TrainConfig", "TrainingError",
    "train_autoencoder", "save_autoencoder", "load_autoencoder", "rebuild",
]

from .loop import (AccTracker, BatchInfo, EpochRecord, TrainResult, TrainState, evaluate,
                   load_datasets, train, write_metrics)
from .model import ForwardCache, MlpModel, backward, forward
from .optim import Adam, LrSchedule, SGDNesterov, make_optimizer

__all__ = [
    "AccTracker", "Adam", "BatchInfo", "EpochRecord", "ForwardCache", "LrSchedule", "MlpModel",
    "SGDNesterov", "TrainResult", "TrainState", "backward", "evaluate", "forward", "load_datasets",
    "make_optimizer", "train", "write_metrics",
]

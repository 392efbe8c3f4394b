from .checkpoint import (
    CheckpointError,
    ModelCheckpoint,
    init_model,
    load_checkpoint,
    save_checkpoint,
)
from .model import ModelConfig, Transformer
from .optim import AdamW, OptimizerConfig, lr_at
from .training import (
    TrainingError,
    finetune_init,
    loss_and_grads,
    mean_loss,
    train,
    train_step,
    truncate_ids,
)

__all__ = [
    "AdamW",
    "CheckpointError",
    "ModelCheckpoint",
    "ModelConfig",
    "OptimizerConfig",
    "TrainingError",
    "Transformer",
    "finetune_init",
    "init_model",
    "load_checkpoint",
    "loss_and_grads",
    "lr_at",
    "mean_loss",
    "save_checkpoint",
    "train",
    "train_step",
    "truncate_ids",
]

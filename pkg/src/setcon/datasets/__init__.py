from .balls import bouncing_balls_sequence, generate_balls_dataset, simulate_balls
from .container import dataset_read, dataset_write, split_train_eval
from .gridworld import (
    gridworld_batch,
    gridworld_sequence,
    gridworld_state_space_size,
    gridworld_step,
)
from .palette import palette
from .types import VideoSequence, scale_to_unit_interval

__all__ = [
    "VideoSequence",
    "bouncing_balls_sequence",
    "dataset_read",
    "dataset_write",
    "generate_balls_dataset",
    "gridworld_batch",
    "gridworld_sequence",
    "gridworld_state_space_size",
    "gridworld_step",
    "palette",
    "scale_to_unit_interval",
    "simulate_balls",
    "split_train_eval",
]

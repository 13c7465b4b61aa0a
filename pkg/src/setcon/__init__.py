"""Object-centric video representation learning with set-contrastive training."""

__version__ = "0.1.0"

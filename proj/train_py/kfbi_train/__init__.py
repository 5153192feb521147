"""Trainer for KFBI operator models."""

from .formats import FormatError, read_dataset, read_golden, read_weights, write_dataset, write_golden, write_weights

__all__ = ["FormatError", "read_dataset", "read_golden", "read_weights", "write_dataset", "write_golden",
           "write_weights"]

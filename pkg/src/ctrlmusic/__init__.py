"""Controllable symbolic music: event codec, control-token finetuning, masked sampling, metrics."""

__version__ = "0.1.0"

"""Desk-scale conditional-GAN lab: adversarial importance weighting (AIW) and
multi-hop sample training (MST) on synthetic attribute-indexed domains."""

__version__ = "0.1.0"

from . import aiw, autodiff, checkpoint, evaluate, models, mst, optim, synthdata, training, verify

__all__ = [
    "aiw",
    "autodiff",
    "checkpoint",
    "evaluate",
    "models",
    "mst",
    "optim",
    "synthdata",
    "training",
    "verify",
]

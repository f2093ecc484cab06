"""Python access to the relighting engine.

Configs are plain dicts using the same keys as the JSON run configs.
"""

import json

from ._ian import IanError, Model as _Model, psnr, resize_bicubic, sh_from_direction, ssim, gradient_loss
from . import _ian

__all__ = [
    "IanError",
    "Model",
    "count_params",
    "default_config",
    "estimate_macs",
    "evaluate",
    "gen_dataset",
    "gradient_loss",
    "psnr",
    "resize_bicubic",
    "sh_from_direction",
    "ssim",
    "train",
]


def default_config():
    return json.loads(_ian.default_config())


def count_params(model=None):
    return _ian.count_params(json.dumps(model or {}))


def estimate_macs(model=None, height=1024, width=1024):
    return _ian.estimate_macs(json.dumps(model or {}), height, width)


def gen_dataset(out_dir, **spec):
    _ian.gen_dataset(json.dumps(spec), str(out_dir))


def train(config, checkpoint):
    """Trains from a run config dict and writes the checkpoint."""
    return _ian.train(json.dumps(config), str(checkpoint))


def evaluate(checkpoint, data_dir):
    return json.loads(_ian.evaluate(str(checkpoint), str(data_dir)))


class Model(_Model):
    """A network built from a model config and seed, or loaded from a checkpoint."""

    def __init__(self, checkpoint=None, *, config=None, seed=1):
        if checkpoint is not None:
            super().__init__(str(checkpoint))
        else:
            super().__init__(json.dumps(config or {}), seed)

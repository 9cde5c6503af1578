"""Lookup of the shipped configuration artifacts.

Three files ride along with the package: the default feature weights, the
trained inline predictor, and the whitelist.  Setting PROVMATCH_CONFIG_DIR
points the lookup at another directory; any file missing there falls back to
the shipped copy, so a partial override directory works.
"""

from __future__ import annotations

import os

from .costs import WeightVector, load_weights
from .inlining import InlineModel, load_model
from .whitelist import WhitelistConfig, load_whitelist

ENV_CONFIG_DIR = "PROVMATCH_CONFIG_DIR"
WEIGHTS_FILE = "weights.json"
INLINE_MODEL_FILE = "inline_model.json"
WHITELIST_FILE = "whitelist.json"


def shipped_dir() -> str:
    return os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")


def resolve(name: str) -> str:
    override = os.environ.get(ENV_CONFIG_DIR)
    if override:
        candidate = os.path.join(override, name)
        if os.path.exists(candidate):
            return candidate
    return os.path.join(shipped_dir(), name)


def default_weights() -> WeightVector:
    return load_weights(resolve(WEIGHTS_FILE))


def default_inline_model() -> InlineModel:
    return load_model(resolve(INLINE_MODEL_FILE))


def default_whitelist_config() -> WhitelistConfig:
    return load_whitelist(resolve(WHITELIST_FILE))

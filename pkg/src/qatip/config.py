"""Experiment configuration: a flat JSON document with typo-safe loading.

Every key has a default; unknown keys are rejected.  Paths given in the file
must exist when the config is loaded.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass

ARCHES = ("rnn", "transformer")
VARIANTS = ("vanilla", "qa_enc", "qa_dec", "both")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    arch: str = "transformer"
    variant: str = "both"
    data: str = ""
    vocab: str = ""
    tokenize_mode: str = "whitespace"
    review_max_len: int = 150
    query_max_len: int = 5
    tip_max_len: int = 15
    # optimization
    lr: float = 0.001
    batch_size: int = 128
    epochs: int = 10
    seed: int = 0
    grad_clip: float = 5.0
    split_data: bool = True
    # transformer dims
    model_dim: int = 512
    num_heads: int = 8
    num_layers: int = 6
    ffn_dim: int = 0
    tie_output: bool = True
    query_block_depth: int = 1
    share_query_block: bool = True
    # rnn dims
    emb_dim: int = 128
    hidden_dim: int = 256
    dropout: float = 0.1
    # decoding
    beam_width: int = 4
    length_alpha: float = 0.0

    def validate(self, check_paths: bool = True) -> "RunConfig":
        if self.arch not in ARCHES:
            raise ConfigError(f"arch must be one of {ARCHES}, got {self.arch!r}")
        if self.variant not in VARIANTS:
            raise ConfigError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        for key in ("review_max_len", "query_max_len", "tip_max_len", "batch_size"):
            if getattr(self, key) < 1:
                raise ConfigError(f"{key} must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.lr <= 0:
            raise ConfigError("lr must be > 0")
        if check_paths:
            for key in ("data", "vocab"):
                path = getattr(self, key)
                if path and not os.path.exists(path):
                    raise ConfigError(f"{key} path does not exist: {path}")
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def run_config_from_dict(doc: dict, check_paths: bool = True) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config document is not a JSON object")
    unknown = sorted(set(doc) - set(_FIELDS))
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    kwargs = {}
    for name, value in doc.items():
        want = _FIELDS[name].type
        if want == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"config key {name} must be an integer")
        elif want == "float":
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(f"config key {name} must be a number")
            value = float(value)
        elif want == "str":
            if not isinstance(value, str):
                raise ConfigError(f"config key {name} must be a string")
        elif want == "bool":
            if not isinstance(value, bool):
                raise ConfigError(f"config key {name} must be a boolean")
        kwargs[name] = value
    return RunConfig(**kwargs).validate(check_paths)


def load_run_config(path: str, check_paths: bool = True) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc}") from None
    return run_config_from_dict(doc, check_paths)


def model_config_from_run(config: RunConfig, vocab_size: int):
    """Model hyperparameters for the configured architecture."""
    if config.arch == "transformer":
        from .transformer import TransformerConfig

        return TransformerConfig(
            vocab_size=vocab_size,
            model_dim=config.model_dim,
            num_heads=config.num_heads,
            num_layers=config.num_layers,
            ffn_dim=config.ffn_dim,
            dropout=config.dropout,
            variant=config.variant,
            max_len=2 + max(config.review_max_len, config.query_max_len, config.tip_max_len),
            query_block_depth=config.query_block_depth,
            share_query_block=config.share_query_block,
            tie_output=config.tie_output,
        )
    from .rnn import RnnConfig

    return RnnConfig(
        vocab_size=vocab_size,
        emb_dim=config.emb_dim,
        hidden_dim=config.hidden_dim,
        variant=config.variant,
        dropout=config.dropout,
    )

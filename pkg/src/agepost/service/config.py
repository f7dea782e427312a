"""Service configuration from environment variables and overrides."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from ..annotate import SelectionPolicy
from ..grid import AgeGrid
from ..posterior import LogisticModel

ENV_PREFIX = "AGEPOST_"


def _env(name: str, default: Any = None) -> Any:
    return os.environ.get(ENV_PREFIX + name, default)


@dataclass
class ServiceConfig:
    grid_min: int = 0
    grid_max: int = 70
    beta: float = 0.36
    num_below: int = 3
    num_above: int = 3
    gender_match_required: bool = True
    selection_seed: int = 0
    selection_fallback: bool = False
    # Pool pre-filter: offer only references within this many years of the
    # rough age estimate (0 disables). Keeps comparisons informative.
    bracket_window: int = 8
    refs_path: str | None = None
    data_dir: str = "agepost-data"
    host: str = "127.0.0.1"
    port: int = 8000
    fsync: bool = True
    snapshot_every: int = 1000

    @property
    def grid(self) -> AgeGrid:
        return AgeGrid(self.grid_min, self.grid_max)

    @property
    def model(self) -> LogisticModel:
        return LogisticModel(self.beta)

    @property
    def policy(self) -> SelectionPolicy:
        return SelectionPolicy(
            num_below=self.num_below,
            num_above=self.num_above,
            gender_match_required=self.gender_match_required,
            rng_seed=self.selection_seed,
        )

    @property
    def log_path(self) -> Path:
        return Path(self.data_dir) / "events.jsonl"

    @property
    def snapshot_path(self) -> Path:
        return Path(self.data_dir) / "snapshot.json"

    @classmethod
    def from_env(cls, **overrides: Any) -> "ServiceConfig":
        def as_bool(v: Any) -> bool:
            return str(v).lower() in ("1", "true", "yes", "on")

        cfg = cls(
            grid_min=int(_env("GRID_MIN", 0)),
            grid_max=int(_env("GRID_MAX", 70)),
            beta=float(_env("BETA", 0.36)),
            num_below=int(_env("NUM_BELOW", 3)),
            num_above=int(_env("NUM_ABOVE", 3)),
            gender_match_required=as_bool(_env("GENDER_MATCH", "true")),
            selection_seed=int(_env("SEED", 0)),
            selection_fallback=as_bool(_env("SELECTION_FALLBACK", "false")),
            bracket_window=int(_env("BRACKET_WINDOW", 8)),
            refs_path=_env("REFS"),
            data_dir=str(_env("DATA_DIR", "agepost-data")),
            host=str(_env("HOST", "127.0.0.1")),
            port=int(_env("PORT", 8000)),
            fsync=as_bool(_env("FSYNC", "true")),
            snapshot_every=int(_env("SNAPSHOT_EVERY", 1000)),
        )
        for key, value in overrides.items():
            if value is not None:
                setattr(cfg, key, value)
        return cfg

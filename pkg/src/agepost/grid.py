"""Integer age grid and discrete probability distributions over it."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

NORMALIZATION_TOL = 1e-9


@dataclass(frozen=True)
class AgeGrid:
    """Inclusive integer age range with one bin per year."""

    min_age: int = 0
    max_age: int = 70

    def __post_init__(self) -> None:
        if self.min_age < 0:
            raise ValueError(f"min_age must be non-negative, got {self.min_age}")
        if self.max_age <= self.min_age:
            raise ValueError(
                f"max_age must exceed min_age, got [{self.min_age}, {self.max_age}]"
            )

    @property
    def n_bins(self) -> int:
        return self.max_age - self.min_age + 1

    @property
    def midpoint(self) -> int:
        return (self.min_age + self.max_age) // 2

    def ages(self) -> np.ndarray:
        return np.arange(self.min_age, self.max_age + 1)

    def contains(self, age: int) -> bool:
        return self.min_age <= age <= self.max_age

    def index_of(self, age: int) -> int:
        if not self.contains(age):
            raise ValueError(f"age {age} outside grid [{self.min_age}, {self.max_age}]")
        return int(age) - self.min_age

    def to_dict(self) -> dict[str, int]:
        return {"min_age": self.min_age, "max_age": self.max_age}

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "AgeGrid":
        return cls(min_age=int(d["min_age"]), max_age=int(d["max_age"]))


@dataclass(frozen=True, eq=False)
class AgeDistribution:
    """Normalized probability mass over every integer age of a grid.

    The mass array is validated on construction and frozen read-only:
    non-negative, one entry per grid bin, summing to 1 within
    ``NORMALIZATION_TOL``.
    """

    grid: AgeGrid
    mass: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.mass, dtype=float).copy()
        if m.shape != (self.grid.n_bins,):
            raise ValueError(
                f"mass has shape {m.shape}, grid has {self.grid.n_bins} bins"
            )
        if not np.all(np.isfinite(m)):
            raise ValueError("mass contains non-finite entries")
        if np.any(m < 0):
            raise ValueError("mass contains negative entries")
        total = float(m.sum())
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"mass sums to {total!r}, expected 1 within {NORMALIZATION_TOL}")
        m.flags.writeable = False
        object.__setattr__(self, "mass", m)

    @classmethod
    def uniform(cls, grid: AgeGrid) -> "AgeDistribution":
        return cls(grid, np.full(grid.n_bins, 1.0 / grid.n_bins))

    @classmethod
    def point_mass(cls, grid: AgeGrid, age: int) -> "AgeDistribution":
        m = np.zeros(grid.n_bins)
        m[grid.index_of(age)] = 1.0
        return cls(grid, m)

    @classmethod
    def from_unnormalized(cls, grid: AgeGrid, mass: np.ndarray) -> "AgeDistribution":
        m = np.asarray(mass, dtype=float)
        if np.any(m < 0):
            raise ValueError("unnormalized mass contains negative entries")
        total = float(m.sum())
        if not np.isfinite(total) or total <= 0.0:
            raise ValueError(f"unnormalized mass has total {total!r}")
        return cls(grid, m / total)

    def to_dict(self) -> dict[str, Any]:
        return {
            "min_age": self.grid.min_age,
            "max_age": self.grid.max_age,
            "mass": [float(v) for v in self.mass],
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "AgeDistribution":
        grid = AgeGrid(min_age=int(d["min_age"]), max_age=int(d["max_age"]))
        return cls(grid, np.asarray(d["mass"], dtype=float))

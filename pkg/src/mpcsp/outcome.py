"""Result types shared by every solver."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np


@dataclass(frozen=True)
class Satisfied:
    """A verified satisfying assignment."""

    assignment: np.ndarray
    iterations: int
    attempts: int = 1
    message_updates: int = 0

    @property
    def ok(self) -> bool:
        return True


@dataclass(frozen=True)
class Contradiction:
    """A single attempt failed.

    ``reason`` is ``"contradiction"`` when incoming messages at ``variable``
    forbade every value during ``sweep``, or ``"unverified"`` when the run
    finished but its assignment violated a constraint.
    """

    attempt: int
    sweep: int
    variable: int
    iterations: int = 0
    message_updates: int = 0
    reason: str = "contradiction"

    @property
    def ok(self) -> bool:
        return False


@dataclass(frozen=True)
class Exhausted:
    """Every attempt of a retry schedule failed."""

    attempts: int
    iterations: int = 0
    message_updates: int = 0

    @property
    def ok(self) -> bool:
        return False


SolveOutcome = Union[Satisfied, Contradiction, Exhausted]

"""Result container shared by the splitting driver and the reference integrator."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

COMPLETED = "completed"
ABORTED = "aborted"


@dataclass
class Trajectory:
    """Recorded states of one integration.

    ``status`` is ``"completed"`` or ``"aborted"``; an aborted run carries a
    machine-readable ``reason`` and the time ``t_abort`` of the last state it
    reached. ``steps`` counts every step taken, recorded or not.
    """

    times: np.ndarray
    states: np.ndarray
    status: str = COMPLETED
    reason: Optional[str] = None
    t_abort: Optional[float] = None
    steps: int = 0

    @classmethod
    def from_lists(cls, times, states, **kw) -> "Trajectory":
        states = np.asarray(states, dtype=float)
        if states.ndim == 1:
            states = states.reshape(len(times), -1)
        return cls(np.asarray(times, dtype=float), states, **kw)

    @property
    def completed(self) -> bool:
        return self.status == COMPLETED

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]

    @property
    def t_final(self) -> float:
        return float(self.times[-1])

    def max_norm(self, ord=2) -> float:
        return float(np.max(np.linalg.norm(self.states, ord=ord, axis=1)))

    def __len__(self):
        return len(self.times)

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid
from .model import State3


@dataclass(eq=False)
class TrajectoryMesh:
    """States of one run sampled at increasing times.

    ``data`` has shape (M + 1, 3, n).  Meshes built by a single Duhamel
    window are uniform; concatenated or CFL-sampled meshes need not be.
    """

    grid: Grid
    times: np.ndarray
    data: np.ndarray = field(repr=False)
    status: str = "complete"
    stop_time: float | None = None
    windows: list = field(default_factory=list)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 3 or self.data.shape[1:] != (3, self.grid.n):
            raise ValueError(f"bad trajectory data shape {self.data.shape}")
        if len(self.times) != len(self.data):
            raise ValueError("times and states differ in length")
        if len(self.times) > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")

    @classmethod
    def constant(cls, V: State3, times) -> "TrajectoryMesh":
        times = np.asarray(times, dtype=float)
        return cls(V.grid, times, np.broadcast_to(V.data, (len(times), 3, V.grid.n)).copy())

    @classmethod
    def from_states(cls, times, states) -> "TrajectoryMesh":
        states = list(states)
        return cls(states[0].grid, np.asarray(times), np.array([s.data for s in states]))

    def __len__(self):
        return len(self.times)

    def state(self, i: int) -> State3:
        return State3(self.grid, self.data[i])

    @property
    def states(self) -> list[State3]:
        return [self.state(i) for i in range(len(self))]

    @property
    def final(self) -> State3:
        return self.state(-1)

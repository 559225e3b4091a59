"""Uniform node grids in one and two dimensions.

Nodes include both domain endpoints: ``w_i = w_min + i * dw`` for
``i = 0..N`` with ``N = n_nodes - 1``.  Interface ``i`` sits between nodes
``i`` and ``i + 1`` (the ``i + 1/2`` interface), so a grid with ``N + 1``
nodes has ``N`` interior interfaces.  Boundary fluxes are not stored; the
schemes impose them as zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Grid1D:
    w_min: float
    w_max: float
    n_nodes: int

    def __post_init__(self) -> None:
        if not (np.isfinite(self.w_min) and np.isfinite(self.w_max)):
            raise ValueError("grid bounds must be finite")
        if self.w_max <= self.w_min:
            raise ValueError(f"w_max ({self.w_max}) must exceed w_min ({self.w_min})")
        if int(self.n_nodes) != self.n_nodes or self.n_nodes < 3:
            raise ValueError(f"n_nodes must be an integer >= 3, got {self.n_nodes}")

    @property
    def n(self) -> int:
        """Index of the last node."""
        return self.n_nodes - 1

    @property
    def dw(self) -> float:
        return (self.w_max - self.w_min) / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        return self.w_min + self.dw * np.arange(self.n_nodes)

    @cached_property
    def midpoints(self) -> np.ndarray:
        w = self.nodes
        return 0.5 * (w[:-1] + w[1:])

    def node(self, i: int) -> float:
        if not 0 <= i <= self.n:
            raise IndexError(f"node index {i} outside 0..{self.n}")
        return self.w_min + i * self.dw

    def interface_midpoint(self, i: int) -> float:
        if not 0 <= i <= self.n - 1:
            raise IndexError(f"interface index {i} outside 0..{self.n - 1}")
        return 0.5 * (self.node(i) + self.node(i + 1))

    @classmethod
    def from_spacing(cls, w_min: float, w_max: float, dw: float) -> "Grid1D":
        n = int(round((w_max - w_min) / dw))
        if not np.isclose(n * dw, w_max - w_min, rtol=1e-10, atol=0.0):
            raise ValueError(f"spacing {dw} does not divide [{w_min}, {w_max}]")
        return cls(w_min, w_max, n + 1)


@dataclass(frozen=True)
class Grid2D:
    """Tensor grid; axis 0 of every 2D array runs along ``axis_w``."""

    axis_w: Grid1D
    axis_v: Grid1D

    @property
    def shape(self) -> tuple[int, int]:
        return (self.axis_w.n_nodes, self.axis_v.n_nodes)

    @property
    def cell_area(self) -> float:
        return self.axis_w.dw * self.axis_v.dw

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.axis_w.nodes, self.axis_v.nodes, indexing="ij")

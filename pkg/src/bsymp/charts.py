"""Coordinate charts with a distinguished hypersurface {x1 = 0}.

Everything in this toolkit is chart-level: a chart is an even-dimensional
box, optionally periodic in some coordinates (torus factors), and either
carries the hypersurface Z = {x1 = 0} in its interior or is an ordinary
chart without one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ChartError(ValueError):
    pass


@dataclass(frozen=True)
class BChart:
    dim: int
    box: tuple[tuple[float, float], ...]
    periodic: tuple[bool, ...] = ()
    has_Z: bool = True
    name: str = ""

    def __post_init__(self):
        if self.dim < 2 or self.dim % 2:
            raise ChartError(f"chart dimension must be even and >= 2, got {self.dim}")
        box = tuple((float(a), float(b)) for a, b in self.box)
        if len(box) != self.dim:
            raise ChartError(f"box has {len(box)} intervals for dim {self.dim}")
        for a, b in box:
            if not a < b:
                raise ChartError(f"degenerate box interval [{a}, {b}]")
        object.__setattr__(self, "box", box)
        per = tuple(bool(p) for p in self.periodic) or (False,) * self.dim
        if len(per) != self.dim:
            raise ChartError("periodic flags must match dimension")
        object.__setattr__(self, "periodic", per)
        if self.has_Z and not (box[0][0] < 0.0 < box[0][1]):
            raise ChartError("chart with Z must contain x1 = 0 in its interior")

    # ------------------------------------------------------------------
    def axis_points(self, i: int, n: int) -> np.ndarray:
        """Deterministic sample points along coordinate i (0-based axis)."""
        lo, hi = self.box[i]
        if self.periodic[i]:
            pts = lo + (hi - lo) * (np.arange(n) + 0.5) / n
        else:
            pts = np.linspace(lo, hi, n)
        if i == 0 and self.has_Z:
            # keep generic grids off the hypersurface; Z gets its own grids
            step = (hi - lo) / max(n, 2)
            pts = np.where(np.abs(pts) < 1e-12, pts + 0.25 * step, pts)
        return pts

    def grid(self, n_per_axis: int) -> np.ndarray:
        """Full tensor grid, shape (n^dim, dim)."""
        axes = [self.axis_points(i, n_per_axis) for i in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def grid_total(self, total: int) -> np.ndarray:
        """Tensor grid with roughly `total` points overall."""
        n = max(2, int(np.ceil(total ** (1.0 / self.dim))))
        return self.grid(n)

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        lo = np.array([a for a, _ in self.box])
        hi = np.array([b for _, b in self.box])
        return lo + (hi - lo) * rng.random((n, self.dim))

    def z_grid(self, n_per_axis: int) -> np.ndarray:
        """Grid on {x1 = 0}: points in the remaining dim-1 coordinates."""
        if not self.has_Z:
            raise ChartError("chart has no hypersurface")
        axes = [self.axis_points(i, n_per_axis) for i in range(1, self.dim)]
        if not axes:
            return np.zeros((1, 0))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def with_z_inserted(self, z_points: np.ndarray) -> np.ndarray:
        """Embed z_grid points back as chart points with x1 = 0."""
        z_points = np.atleast_2d(z_points)
        return np.hstack([np.zeros((z_points.shape[0], 1)), z_points])

    def spec(self) -> dict:
        return {"dim": self.dim, "box": [list(b) for b in self.box],
                "periodic": list(self.periodic), "has_Z": self.has_Z,
                "name": self.name}

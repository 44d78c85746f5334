"""Driving processes and exact path simulation.

X is either Brownian motion B or the geometric Brownian motion
S_t = exp(B_t - t/2).  S is always built from a Brownian layer, so the
same random draws serve both models.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DomainError, GridMismatchError, InvalidArgumentError, InvalidGridError
from .rng import RngStream


@dataclass(frozen=True)
class Model:
    """Model ``kind`` is ``"B"`` (Brownian motion) or ``"S"`` (geometric)."""

    kind: str

    def __post_init__(self):
        if self.kind not in ("B", "S"):
            raise InvalidArgumentError(f"unknown model kind {self.kind!r}")

    @classmethod
    def parse(cls, name):
        aliases = {"b": "B", "bm": "B", "s": "S", "gbm": "S"}
        try:
            return cls(aliases[str(name).lower()])
        except KeyError:
            raise InvalidArgumentError(f"unknown model {name!r}") from None

    @property
    def x0(self):
        return 0.0 if self.kind == "B" else 1.0

    def sigma(self, x):
        x = np.asarray(x, dtype=float)
        return np.ones_like(x) if self.kind == "B" else x

    def sigma_prime(self, x):
        x = np.asarray(x, dtype=float)
        return np.zeros_like(x) if self.kind == "B" else np.ones_like(x)

    def in_domain(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "B":
            return np.isfinite(x)
        return np.isfinite(x) & (x > 0)

    def check_domain(self, x):
        if not np.all(self.in_domain(x)):
            raise DomainError(f"state outside E for model {self.kind}")

    def from_brownian(self, t, b):
        """Map Brownian values ``b`` at times ``t`` to X."""
        if self.kind == "B":
            return np.asarray(b, dtype=float)
        return np.exp(np.asarray(b) - 0.5 * np.asarray(t))

    def to_brownian(self, t, x):
        if self.kind == "B":
            return np.asarray(x, dtype=float)
        return np.log(x) + 0.5 * np.asarray(t)


@dataclass(frozen=True)
class Grid:
    """Strictly increasing times in [0, 1] starting at 0."""

    times: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise InvalidGridError("grid must be a non-empty 1-d sequence")
        if t[0] != 0.0:
            raise InvalidGridError("grid must start at 0")
        if np.any(t < 0) or np.any(t > 1) or not np.all(np.isfinite(t)):
            raise InvalidGridError("grid times must lie in [0, 1]")
        if np.any(np.diff(t) <= 0):
            raise InvalidGridError("grid times must be strictly increasing")
        t.setflags(write=False)
        object.__setattr__(self, "times", t)

    def __len__(self):
        return self.times.size

    def index_of(self, t):
        """Indices of the given times in the grid, -1 for misses."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.searchsorted(self.times, t)
        idx = np.minimum(idx, self.times.size - 1)
        hit = self.times[idx] == t
        return np.where(hit, idx, -1)

    def contains(self, t):
        return bool(np.all(self.index_of(t) >= 0))

    def union(self, other):
        return Grid(np.union1d(self.times, np.asarray(other, dtype=float)))

    def refine(self, factor):
        if factor < 1:
            raise InvalidArgumentError("refinement factor must be >= 1")
        t = self.times
        if factor == 1 or t.size == 1:
            return self
        frac = np.arange(factor) / factor
        fine = (t[:-1, None] + np.diff(t)[:, None] * frac).ravel()
        return Grid(np.append(fine, t[-1]))


@dataclass(frozen=True)
class PathSample:
    """Simulated values of X on a grid.

    ``values`` and ``brownian`` have shape ``(len(grid),)`` for a single path
    or ``(m, len(grid))`` for a batch whose rows are paths
    ``path_offset .. path_offset + m - 1`` of ``stream``.
    """

    grid: Grid
    values: np.ndarray
    model_kind: str
    stream: Optional[RngStream]
    brownian: np.ndarray = field(repr=False)
    path_offset: int = 0

    def __post_init__(self):
        for arr in (self.values, self.brownian):
            arr.setflags(write=False)

    @property
    def model(self):
        return Model(self.model_kind)

    @property
    def n_paths(self):
        return 1 if self.values.ndim == 1 else self.values.shape[0]

    def at(self, t):
        """Values at grid times ``t`` (must be grid points)."""
        idx = self.grid.index_of(t)
        if np.any(idx < 0):
            raise GridMismatchError("requested times are not on the path grid")
        return self.values[..., idx]


def _draw_brownian(grid, stream, n_paths, path_offset):
    t = grid.times
    m = 1 if n_paths is None else n_paths
    b = np.zeros((m, t.size))
    if t.size > 1:
        z = stream.path_normals(m, t.size - 1, path_offset)
        b[:, 1:] = np.cumsum(z * np.sqrt(np.diff(t)), axis=1)
    return b[0] if n_paths is None else b


def sample_path(model, grid, stream, n_paths=None, path_offset=0):
    """Exact simulation of X on ``grid``.

    With ``n_paths=None`` a single path (path ``path_offset`` of the stream)
    is returned as 1-d arrays.
    """
    if not isinstance(grid, Grid):
        grid = Grid(grid)
    b = _draw_brownian(grid, stream, n_paths, path_offset)
    x = model.from_brownian(grid.times, b)
    return PathSample(grid, x, model.kind, stream, b, path_offset)


def refine_path(model, coarse, factor, stream):
    """Insert ``factor - 1`` equally spaced times per interval.

    New Brownian values are drawn from the Brownian-bridge law, one point at
    a time from left to right; values at the original times are kept.
    """
    if int(factor) != factor or factor < 1:
        raise InvalidArgumentError("factor must be a positive integer")
    factor = int(factor)
    if factor == 1:
        return coarse
    t = coarse.grid.times
    fine_grid = coarse.grid.refine(factor)
    b = np.atleast_2d(coarse.brownian)
    m, nt = b.shape
    nint = nt - 1
    z = stream.path_normals(m, nint * (factor - 1), coarse.path_offset)
    z = z.reshape(m, nint, factor - 1)
    dt = np.diff(t)
    left = b[:, :-1].copy()
    right = b[:, 1:]
    out = np.empty((m, nint, factor))
    out[:, :, 0] = left
    h = dt / factor
    for j in range(1, factor):
        # bridge from the last inserted point (time t_i + (j-1)h) to t_{i+1}
        rem = dt - (j - 1) * h
        w = h / rem
        mean = left + w * (right - left)
        var = h * (rem - h) / rem
        left = mean + np.sqrt(var) * z[:, :, j - 1]
        out[:, :, j] = left
    fine_b = np.concatenate([out.reshape(m, -1), b[:, -1:]], axis=1)
    if coarse.values.ndim == 1:
        fine_b = fine_b[0]
    x = model.from_brownian(fine_grid.times, fine_b)
    return PathSample(fine_grid, x, model.kind, coarse.stream, fine_b,
                      coarse.path_offset)


def graded_grid(n, power):
    """Grid ``1 - (1 - j/n)**power``, j = 0..n, last point exactly 1."""
    j = np.arange(n + 1)
    t = 1.0 - (1.0 - j / n) ** power
    t[-1] = 1.0
    return Grid(t)

"""Deterministic time-nets t_i = 1 - (1 - i/n)**(1/beta)."""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .model import Grid


@dataclass(frozen=True)
class TimeNet:
    """Knots of the beta-adapted net.

    ``to_maturity[i]`` holds ``1 - knots[i]`` computed directly as
    ``(1 - i/n)**(1/beta)`` so that it keeps full relative precision close
    to t = 1.
    """

    n: int
    beta: float
    knots: np.ndarray
    to_maturity: np.ndarray

    @property
    def grid(self):
        return Grid(self.knots)

    def __len__(self):
        return self.knots.size


@dataclass(frozen=True)
class MeshStats:
    max_interval: float
    max_weighted_ratio: float
    bound: float


def build_net(n, beta):
    if int(n) != n or n < 1:
        raise InvalidArgumentError("n must be a positive integer")
    if not 0.0 < beta <= 1.0:
        raise InvalidArgumentError("beta must lie in (0, 1]")
    n = int(n)
    rem = (1.0 - np.arange(n + 1) / n) ** (1.0 / beta)
    rem[-1] = 0.0
    knots = 1.0 - rem
    knots[0] = 0.0
    knots[-1] = 1.0
    for a in (knots, rem):
        a.setflags(write=False)
    return TimeNet(n, float(beta), knots, rem)


def mesh_stats(net):
    """Largest interval and the weighted ratio of inequality (4).

    For u in [t_i, t_{i+1}) the ratio (t_{i+1} - u) / (1 - u)**(1 - beta) is
    non-increasing in u, so its supremum sits at u = t_i.
    """
    dt = net.to_maturity[:-1] - net.to_maturity[1:]
    ratio = dt / net.to_maturity[:-1] ** (1.0 - net.beta)
    return MeshStats(float(dt.max()), float(ratio.max()), 1.0 / (net.beta * net.n))


def weighted_ratio(net, u):
    """(t_{i+1} - u) / (1 - u)**(1 - beta) for u in its net interval."""
    u = np.asarray(u, dtype=float)
    i = np.clip(np.searchsorted(net.knots, u, side="right") - 1, 0, net.n - 1)
    return (net.knots[i + 1] - u) / (1.0 - u) ** (1.0 - net.beta)

"""Gaussian quadrature helpers shared by the payoff and smoothness layers.

Two families are used:

* Gauss-Hermite (probabilists' weight) for smooth integrands under N(0, 1).
* Composite Gauss-Legendre panels split at kinks, graded towards them, for
  integrands with jumps or endpoint singularities.
"""

from functools import lru_cache

import numpy as np
from scipy.special import roots_hermitenorm

from .errors import AccuracyError

SQRT2PI = np.sqrt(2.0 * np.pi)
# N(0,1) mass beyond 12 standard deviations is below 1e-32
GAUSS_CUTOFF = 12.0
RTOL = 1e-10
MAX_NODES = 1024


@lru_cache(maxsize=None)
def gauss_hermite(n):
    """Nodes and weights with ``sum(w * f(x)) ~ E f(Z)``, Z ~ N(0, 1)."""
    x, w = roots_hermitenorm(n)
    w = w / SQRT2PI
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=None)
def gauss_legendre01(n):
    """Gauss-Legendre rule on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gaussian_pdf(z):
    return np.exp(-0.5 * np.square(z)) / SQRT2PI


def _converged(a, b, scale):
    # the floor keeps rows that underflow to subnormals from blocking convergence
    return np.all(np.abs(a - b) <= RTOL * np.abs(b) + 1e-13 * scale + 1e-290)


def hermite_expectation(func, nodes=128, max_nodes=MAX_NODES):
    """E func(Z) by Gauss-Hermite with node doubling.

    ``func`` maps an array of nodes ``(q,)`` to values ``(..., q)``.
    """
    prev = None
    n = nodes
    while n <= max_nodes:
        x, w = gauss_hermite(n)
        vals = func(x)
        est = vals @ w
        if prev is not None and _converged(prev, est, np.abs(vals) @ w):
            return est
        prev = est
        n *= 2
    raise AccuracyError("Gauss-Hermite quadrature did not converge")


def _split_nodes(breaks, q, cutoff=GAUSS_CUTOFF, grade=3):
    """Nodes ``(N, 4q)`` and Lebesgue weights for [-cutoff, cutoff] split at
    one break per row.

    Each side of the break is a graded panel of unit length next to the
    break (nodes cluster like ``v**grade``) plus a plain panel out to the
    cutoff.
    """
    b = np.clip(np.asarray(breaks, dtype=float), -cutoff, cutoff)[:, None]
    v, wv = gauss_legendre01(q)
    g = v ** grade
    dg = grade * v ** (grade - 1) * wv
    near_r = np.minimum(b + 1.0, cutoff) - b
    near_l = b - np.maximum(b - 1.0, -cutoff)
    far_r = cutoff - (b + near_r)
    far_l = (b - near_l) + cutoff
    z = np.concatenate([
        b + near_r * g,
        b - near_l * g,
        b + near_r + far_r * v,
        -cutoff + far_l * v,
    ], axis=1)
    w = np.concatenate([
        near_r * dg,
        near_l * dg,
        far_r * wv + 0 * b,
        far_l * wv + 0 * b,
    ], axis=1)
    return z, w


def split_expectation(func, breaks, nodes=128, max_nodes=MAX_NODES):
    """E func(Z), Z ~ N(0, 1), for integrands with one kink per row.

    ``breaks`` has shape ``(N,)``; ``func`` maps nodes ``(N, q)`` to values
    of the same shape.  Node count doubles until the relative change drops
    below 1e-10.
    """
    breaks = np.atleast_1d(np.asarray(breaks, dtype=float))
    prev = None
    n = nodes
    while n <= max_nodes:
        z, w = _split_nodes(breaks, max(n // 4, 8))
        w = w * gaussian_pdf(z)
        vals = func(z)
        est = np.sum(vals * w, axis=-1)
        if prev is not None and _converged(prev, est, np.sum(np.abs(vals) * w, axis=-1)):
            return est
        prev = est
        n *= 2
    raise AccuracyError("split Gauss-Legendre quadrature did not converge")


def panel_rule(lo, hi, centers=(), width=1.0, q=16, spacing=0.5):
    """Composite Gauss-Legendre rule on [lo, hi].

    Panel edges include a uniform mesh of the given ``spacing`` and, for each
    centre, geometric layers ``c +- width * 2**j`` so that features of size
    ``width`` around the centres are resolved.
    """
    edges = [np.linspace(lo, hi, max(int(np.ceil((hi - lo) / spacing)), 1) + 1)]
    if width > 0:
        span = hi - lo
        jmax = int(np.ceil(np.log2(max(span / width, 1.0)))) + 1
        layers = width * 2.0 ** np.arange(-3, jmax + 1)
        for c in centers:
            if lo <= c <= hi:
                edges.append([c])
            edges.append(c + layers)
            edges.append(c - layers)
    e = np.concatenate([np.atleast_1d(np.asarray(x, dtype=float)) for x in edges])
    e = np.unique(np.clip(e, lo, hi))
    v, wv = gauss_legendre01(q)
    h = np.diff(e)
    x = (e[:-1, None] + h[:, None] * v).ravel()
    w = (h[:, None] * wv).ravel()
    return x, w


def gaussian_panel_rule(centers=(), width=1.0, q=16, cutoff=GAUSS_CUTOFF):
    """Panel rule for E f(Z), Z ~ N(0, 1): weights include the density."""
    x, w = panel_rule(-cutoff, cutoff, centers, width, q)
    return x, w * gaussian_pdf(x)

"""Brute-force reference implementations for cross-checking norms.

Everything here is deliberately written as plain nested loops with its own
minimum-image arithmetic, sharing no code path with the FFT-based evaluators
it verifies.  Only usable on small grids.
"""

import itertools
import math

import numpy as np

from .morrey import ScalarField

__all__ = ["brute_force_lp_norm", "brute_force_morrey_norm", "brute_force_sup_ls"]


def _min_image_dist(geom, a, b):
    total = 0.0
    for i in range(geom.n):
        d = abs(a[i] - b[i]) * geom.h
        d = min(d, geom.L - d)
        total += d * d
    return math.sqrt(total)


def brute_force_lp_norm(f: ScalarField, p: float) -> float:
    if math.isinf(p):
        best = 0.0
        for idx in itertools.product(range(f.geom.N), repeat=f.geom.n):
            best = max(best, abs(float(f.values[idx])))
        return best
    acc = 0.0
    for idx in itertools.product(range(f.geom.N), repeat=f.geom.n):
        acc += abs(float(f.values[idx])) ** p
    return (acc * f.geom.cell_volume) ** (1.0 / p)


def _center_lattice(geom, R):
    stride = max(1, int(math.floor(R / (2 * geom.h) + 1e-12)))
    return itertools.product(range(0, geom.N, stride), repeat=geom.n)


def brute_force_morrey_norm(f: ScalarField, q: float, lam: float, radii) -> float:
    """Triple loop over radii, cover centers, and grid points."""
    geom = f.geom
    if math.isinf(q):
        return brute_force_lp_norm(f, q)
    best = 0.0
    points = list(itertools.product(range(geom.N), repeat=geom.n))
    for R in radii:
        for center in _center_lattice(geom, R):
            acc = 0.0
            for point in points:
                if _min_image_dist(geom, center, point) <= R * (1 + 1e-12):
                    acc += abs(float(f.values[point])) ** q
            value = (R ** (lam - geom.n) * acc * geom.cell_volume) ** (1.0 / q)
            best = max(best, value)
    return best


def brute_force_sup_ls(f: ScalarField, s: float) -> float:
    """sup over unit-ball centers of the local L^s norm, by loops."""
    geom = f.geom
    best = 0.0
    points = list(itertools.product(range(geom.N), repeat=geom.n))
    for center in _center_lattice(geom, 1.0):
        acc = 0.0
        for point in points:
            if _min_image_dist(geom, center, point) <= 1.0 + 1e-12:
                acc += abs(float(f.values[point])) ** s
        best = max(best, (acc * geom.cell_volume) ** (1.0 / s))
    return best

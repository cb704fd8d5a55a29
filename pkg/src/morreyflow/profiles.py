"""Initial data profiles for scalar fields and sphere-valued maps."""

import numpy as np

from .geometry import TorusGeometry
from .morrey import ScalarField

__all__ = [
    "constant",
    "spike",
    "bubble",
    "fourier_mode",
    "singular",
    "random_field",
    "constant_map",
    "bump_map",
    "winding_map",
]


def constant(geom: TorusGeometry, c: float) -> ScalarField:
    return ScalarField(geom, np.full(geom.shape, float(c)))


def spike(geom: TorusGeometry, mass: float = 1.0, center=None) -> ScalarField:
    """One grid cell carrying the given total mass (a discrete point mass)."""
    values = np.zeros(geom.shape)
    idx = tuple(center) if center is not None else (0,) * geom.n
    values[idx] = mass / geom.cell_volume
    return ScalarField(geom, values)


def bubble(geom: TorusGeometry, amplitude: float, width: float, center=None) -> ScalarField:
    """Smooth Gaussian blob amplitude * exp(-d^2 / width^2).

    For width well below L/2 the minimum-image seam at the cut locus is far
    under round-off.
    """
    d = geom.distance_grid(center)
    return ScalarField(geom, amplitude * np.exp(-(d**2) / width**2))


def fourier_mode(geom: TorusGeometry, mode, amplitude: float = 1.0) -> ScalarField:
    """Nonnegative single-mode profile 0.5*amplitude*(1 + cos(k.x))."""
    coords = geom.coordinates()
    phase = np.zeros(geom.shape)
    for m, c in zip(mode, coords):
        phase = phase + (2 * np.pi * m / geom.L) * c
    return ScalarField(geom, 0.5 * amplitude * (1.0 + np.cos(phase)))


def singular(geom: TorusGeometry, gamma: float, cap: float = None, center=None) -> ScalarField:
    """Truncated inverse-power profile min(d^-gamma, cap).

    With gamma = lam/q this is the near-extremizer of the (q, lam) Morrey
    norm; the default cap h^-gamma resolves the singularity down to the grid
    scale while keeping that norm cap-independent.
    """
    d = geom.distance_grid(center)
    if cap is None:
        cap = geom.h ** (-gamma)
    with np.errstate(divide="ignore"):
        values = np.where(d > 0, d ** (-gamma), np.inf)
    return ScalarField(geom, np.minimum(values, cap))


def random_field(geom: TorusGeometry, rng, smooth: float = 0.0, nonneg: bool = False) -> ScalarField:
    """White noise, optionally heat-smoothed to scale sqrt(smooth)."""
    values = rng.standard_normal(geom.shape)
    if smooth > 0:
        from .heat import SpectralPropagator

        values = SpectralPropagator(geom).propagate_values(values, smooth)
    if nonneg:
        values = np.abs(values)
    return ScalarField(geom, values)


def _unit_last(base, k):
    e = np.zeros(k)
    e[-1] = 1.0
    return e


def constant_map(geom: TorusGeometry, k: int, point=None) -> np.ndarray:
    """Constant map values (k, N, ..., N); default value is the last basis vector."""
    p = np.asarray(point, dtype=float) if point is not None else _unit_last(None, k)
    p = p / np.linalg.norm(p)
    values = np.zeros((k,) + geom.shape)
    for a in range(k):
        values[a] = p[a]
    return values


def bump_map(geom: TorusGeometry, k: int, amplitude: float, width: float, center=None) -> np.ndarray:
    """Constant map tilted by a localized tangent bump, then normalized."""
    values = constant_map(geom, k)
    d = geom.distance_grid(center)
    values[0] += amplitude * np.exp(-(d**2) / width**2)
    norms = np.sqrt(np.sum(values**2, axis=0))
    return values / norms


def winding_map(geom: TorusGeometry, k: int, winding: int = 1) -> np.ndarray:
    """Geodesic equator map of the given winding number along the first axis.

    Harmonic but homotopically nontrivial: energy (2 pi m / L)^2 * L^n, a
    closed form the flow cannot dissipate.
    """
    x = geom.coordinates()[0]
    theta = 2 * np.pi * winding * x / geom.L
    values = np.zeros((k,) + geom.shape)
    values[0] = np.cos(theta)
    values[1] = np.sin(theta)
    return values

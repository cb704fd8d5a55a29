"""Flat periodic box (torus) discretization.

The computational domain is the cube torus (R/LZ)^n sampled on a uniform
N^n grid with spacing h = L/N.  Grid point i (an integer multi-index) sits
at coordinate i*h, and integrals are cell_volume-weighted sums (midpoint
quadrature, which is spectrally consistent with the FFT grid).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import RadiusTooSmall, ValidationError

__all__ = ["TorusGeometry", "BallCover", "distance", "make_ball_cover", "dyadic_radii"]


@dataclass(frozen=True)
class TorusGeometry:
    """Uniform grid on the cube torus of side L in dimension n.

    L >= 4 keeps balls of radius 1 free of periodic self-overlap, so the
    sup over radii R <= 1 in the Morrey norm probes genuinely local scales.
    """

    n: int
    L: float
    N: int

    def __post_init__(self):
        if self.n not in (2, 3):
            raise ValidationError(f"requires n in {{2, 3}}, got n={self.n}")
        # Grids down to 8 per axis are admitted so that exhaustive
        # brute-force oracles stay affordable; 16+ is the working range.
        if self.N < 8 or self.N % 2 != 0:
            raise ValidationError(f"requires N >= 8 and even, got N={self.N}")
        if self.L < 4:
            raise ValidationError(f"requires L >= 4, got L={self.L}")

    @property
    def h(self) -> float:
        return self.L / self.N

    @property
    def cell_volume(self) -> float:
        return self.h**self.n

    @property
    def shape(self):
        return (self.N,) * self.n

    @property
    def num_points(self) -> int:
        return self.N**self.n

    def coordinates(self):
        """Coordinate arrays, one (N,...,N) array per axis."""
        axis = np.arange(self.N) * self.h
        return np.meshgrid(*([axis] * self.n), indexing="ij")

    def min_image_displacement(self, delta):
        """Wrap a coordinate displacement into [-L/2, L/2) per axis."""
        delta = np.asarray(delta, dtype=float)
        return (delta + 0.5 * self.L) % self.L - 0.5 * self.L

    def distance_grid(self, center_index=None):
        """Periodic distance from every grid point to a center (default origin)."""
        coords = self.coordinates()
        if center_index is None:
            center_index = (0,) * self.n
        sq = np.zeros(self.shape)
        for c, ci in zip(coords, center_index):
            d = self.min_image_displacement(c - ci * self.h)
            sq += d * d
        return np.sqrt(sq)


def distance(geom: TorusGeometry, x, y) -> float:
    """Minimum-image Euclidean distance between grid points x and y.

    x and y are integer index tuples (or arrays of them, shape (..., n)).
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    delta = geom.min_image_displacement((x - y) * geom.h)
    return np.sqrt(np.sum(delta * delta, axis=-1))


@dataclass(frozen=True)
class BallCover:
    """Cover of the grid by metric balls of one radius.

    Centers form a sub-lattice of spacing <= R/2, which guarantees the
    cover property with bounded overlap.  Membership is translation
    invariant, so only one offset stencil is stored; ``members(i)`` expands
    it for the i-th center.
    """

    geom: TorusGeometry
    radius: float
    stride: int
    centers: np.ndarray = field(repr=False)  # (n_centers, n) integer indices
    offsets: np.ndarray = field(repr=False)  # (n_members, n) integer offsets

    @property
    def n_centers(self) -> int:
        return len(self.centers)

    @property
    def n_members(self) -> int:
        return len(self.offsets)

    @property
    def ball_volume(self) -> float:
        return self.n_members * self.geom.cell_volume

    @property
    def volume_constant(self) -> float:
        """Smallest V >= 1 with V^-1 R^n <= vol(B_R) <= V R^n on this cover."""
        ratio = self.ball_volume / self.radius**self.geom.n
        return max(ratio, 1.0 / ratio, 1.0)

    def members(self, i: int) -> np.ndarray:
        """Grid indices (n_members, n) inside the ball around centers[i]."""
        return (self.centers[i] + self.offsets) % self.geom.N

    def covers_grid(self) -> bool:
        """Exhaustively verify that every grid point lies in some ball."""
        hit = np.zeros(self.geom.shape, dtype=bool)
        for i in range(self.n_centers):
            hit[tuple(self.members(i).T)] = True
        return bool(hit.all())

    def indicator(self) -> np.ndarray:
        """Ball indicator centered at the origin, as a full grid array."""
        ind = np.zeros(self.geom.shape)
        ind[tuple(self.offsets.T % self.geom.N)] = 1.0
        return ind


def make_ball_cover(geom: TorusGeometry, R: float) -> BallCover:
    """Build the ball cover at radius R, 2h <= R <= 1.

    Below 2h a discrete ball may hold a single cell and its volume is no
    longer comparable to R^n, so such radii are rejected.
    """
    h = geom.h
    if R < 2 * h * (1 - 1e-12):
        raise RadiusTooSmall(f"R={R} < 2h={2 * h}")
    if R > 1 + 1e-12:
        raise ValidationError(f"requires R <= 1, got R={R}")

    stride = max(1, int(np.floor(R / (2 * h) + 1e-12)))
    axis = np.arange(0, geom.N, stride)
    centers = np.stack([c.ravel() for c in np.meshgrid(*([axis] * geom.n), indexing="ij")], axis=-1)

    reach = int(np.floor(R / h + 1e-12))
    rng = np.arange(-reach, reach + 1)
    offs = np.stack([o.ravel() for o in np.meshgrid(*([rng] * geom.n), indexing="ij")], axis=-1)
    dist = np.sqrt(np.sum((offs * h) ** 2, axis=-1))
    offsets = offs[dist <= R * (1 + 1e-12)]

    return BallCover(geom=geom, radius=R, stride=stride, centers=centers, offsets=offsets)


def dyadic_radii(geom: TorusGeometry, max_levels: int = 16):
    """Dyadic radii {1, 1/2, ...} truncated at 2h, the smallest usable ball.

    The sup over continuum radii is sampled dyadically; the volume sandwich
    controls what is lost between levels.  If 2h is not itself dyadic it is
    appended so the finest admissible scale is always probed.
    """
    floor = 2 * geom.h
    radii = []
    R = 1.0
    for _ in range(max_levels):
        if R < floor * (1 - 1e-12):
            break
        radii.append(R)
        R /= 2
    if not radii or radii[-1] > floor * (1 + 1e-12):
        radii.append(floor)
    return radii

"""Lebesgue and Morrey norms of grid fields.

The Morrey norm with exponents (q, lam) is the sup over centers x and radii
R <= 1 of (R^(lam-n) * integral of |f|^q over B_R(x))^(1/q).  On the grid the
sup runs over a dyadic radii set and the centers of the per-radius ball
covers; ball integrals for every center at once are circular convolutions
with the ball indicator, evaluated by FFT.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyRadiiSet, ExponentOrderViolation, ValidationError, WrongCoverRadius
from .geometry import BallCover, TorusGeometry, dyadic_radii, make_ball_cover

__all__ = [
    "MorreyParams",
    "ScalarField",
    "MorreyContext",
    "lp_norm",
    "morrey_norm",
    "morrey_norm_report",
    "sup_ls_on_unit_balls",
    "check_embedding",
]


@dataclass(frozen=True)
class MorreyParams:
    """Exponent pair (q, lam); q = inf degenerates to the sup norm."""

    q: float
    lam: float

    def __post_init__(self):
        if not self.q >= 1:
            raise ValidationError(f"requires q >= 1, got q={self.q}")
        if not 0 <= self.lam:
            raise ValidationError(f"requires lam >= 0, got lam={self.lam}")


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real-valued samples on the grid of a TorusGeometry."""

    geom: TorusGeometry
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.geom.shape:
            raise ValidationError(
                f"field shape {self.values.shape} does not match grid {self.geom.shape}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValidationError("field values must be finite")

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.geom, np.asarray(values, dtype=float))


def lp_norm(f: ScalarField, p: float) -> float:
    """Lebesgue norm (sum |f|^p * cell_volume)^(1/p); p = inf is max |f|."""
    if p < 1:
        raise ValidationError(f"requires p >= 1, got p={p}")
    if np.isinf(p):
        return float(np.max(np.abs(f.values)))
    s = float(np.sum(np.abs(f.values) ** p)) * f.geom.cell_volume
    return s ** (1.0 / p)


class MorreyContext:
    """Per-geometry machinery for Morrey norms: radii, covers, indicator FFTs.

    Construction is the expensive part; norm evaluations reuse the cached
    real-FFT of each ball indicator.
    """

    def __init__(self, geom: TorusGeometry, radii=None):
        if radii is not None and len(radii) == 0:
            raise EmptyRadiiSet("radii set is empty")
        self.geom = geom
        self.radii = list(radii) if radii is not None else dyadic_radii(geom)
        floor = 2 * geom.h
        for R in self.radii:
            if R < floor * (1 - 1e-12) or R > 1 + 1e-12:
                raise ValidationError(f"radius {R} outside [2h, 1] = [{floor}, 1]")
        self.covers = {R: make_ball_cover(geom, R) for R in self.radii}
        self._indicator_fft = {
            R: np.fft.rfftn(cover.indicator()) for R, cover in self.covers.items()
        }

    @property
    def volume_constant(self) -> float:
        """Single V valid across every radius of this context."""
        return max(c.volume_constant for c in self.covers.values())

    def cover(self, R: float) -> BallCover:
        return self.covers[R]

    def ball_sums(self, values: np.ndarray, R: float) -> np.ndarray:
        """Sum of `values` over B_R(x) for every grid point x, via FFT.

        The indicator is symmetric, so correlation equals convolution.
        Round-off can leave tiny negatives on nonnegative data; they are
        clipped since the results feed fractional powers.
        """
        return self._ball_sums_from_fft(np.fft.rfftn(values), R)

    def _ball_sums_from_fft(self, values_fft: np.ndarray, R: float) -> np.ndarray:
        axes = tuple(range(self.geom.n))
        conv = np.fft.irfftn(values_fft * self._indicator_fft[R], s=self.geom.shape, axes=axes)
        return np.clip(conv, 0.0, None)

    def _center_values(self, grid_values: np.ndarray, cover: BallCover) -> np.ndarray:
        sl = tuple(slice(None, None, cover.stride) for _ in range(self.geom.n))
        return grid_values[sl]


def morrey_norm(
    f: ScalarField, params: MorreyParams, context: MorreyContext, all_centers: bool = False
) -> float:
    """Morrey norm over the context's radii and cover centers.

    With ``all_centers=True`` the max runs over every grid point as center,
    an upper bound for the cover-restricted value.
    """
    return morrey_norm_report(f, params, context, all_centers)["value"]


def morrey_norm_report(
    f: ScalarField, params: MorreyParams, context: MorreyContext, all_centers: bool = False
) -> dict:
    """Morrey norm plus the maximizing center and radius, as a plain dict."""
    if f.geom is not context.geom and f.geom != context.geom:
        raise ValidationError("field and context use different geometries")
    n = f.geom.n
    if np.isinf(params.q):
        return {
            "q": params.q,
            "lam": params.lam,
            "radii": list(context.radii),
            "value": lp_norm(f, np.inf),
            "argmax_center": None,
            "argmax_radius": None,
        }

    power = np.abs(f.values) ** params.q
    power_fft = np.fft.rfftn(power)
    best = -np.inf
    best_center, best_radius = None, None
    for R in context.radii:
        sums = context._ball_sums_from_fft(power_fft, R) * f.geom.cell_volume
        scaled = R ** (params.lam - n) * sums
        if not all_centers:
            scaled = context._center_values(scaled, context.covers[R])
        flat = int(np.argmax(scaled))
        if scaled.flat[flat] > best:
            best = scaled.flat[flat]
            idx = np.unravel_index(flat, scaled.shape)
            stride = 1 if all_centers else context.covers[R].stride
            best_center = tuple(int(i * stride) for i in idx)
            best_radius = R
    return {
        "q": params.q,
        "lam": params.lam,
        "radii": list(context.radii),
        "value": float(max(best, 0.0) ** (1.0 / params.q)),
        "argmax_center": best_center,
        "argmax_radius": best_radius,
    }


def sup_ls_on_unit_balls(f: ScalarField, s: float, cover: BallCover) -> float:
    """max over centers x of the L^s norm of f on the unit ball B_1(x)."""
    if not 1 <= s < np.inf:
        raise ValidationError(f"requires 1 <= s < inf, got s={s}")
    if abs(cover.radius - 1.0) > 1e-12:
        raise WrongCoverRadius(f"cover radius {cover.radius} != 1")
    power = np.abs(f.values) ** s
    best = 0.0
    for i in range(cover.n_centers):
        ball = power[tuple(cover.members(i).T)]
        best = max(best, float(np.sum(ball)) * f.geom.cell_volume)
    return best ** (1.0 / s)


def _sup_ls_fast(f: ScalarField, s: float, context: MorreyContext) -> float:
    """FFT variant of sup_ls_on_unit_balls, for per-step trajectory records."""
    power = np.abs(f.values) ** s
    sums = context.ball_sums(power, 1.0) * f.geom.cell_volume
    centers = context._center_values(sums, context.covers[1.0])
    return float(np.max(centers)) ** (1.0 / s)


def check_embedding(
    f: ScalarField, p1: MorreyParams, p2: MorreyParams, context: MorreyContext
) -> dict:
    """Empirically verify the Morrey embedding M^{q2,lam2} into M^{q1,lam1}.

    Preconditions q1 <= q2 and lam2 <= (q2/q1)*lam1; Hoelder plus the volume
    sandwich bound the inclusion constant by V^(1/q1 - 1/q2).
    """
    if not p1.q <= p2.q:
        raise ExponentOrderViolation(f"requires q1 <= q2, got {p1.q} > {p2.q}")
    if not np.isinf(p2.q) and p2.lam > (p2.q / p1.q) * p1.lam + 1e-12:
        raise ExponentOrderViolation(
            f"requires lam2 <= (q2/q1)*lam1, got {p2.lam} > {(p2.q / p1.q) * p1.lam}"
        )
    lhs = morrey_norm(f, p1, context)
    rhs = morrey_norm(f, p2, context)
    inv_q2 = 0.0 if np.isinf(p2.q) else 1.0 / p2.q
    bound = context.volume_constant ** (1.0 / p1.q - inv_q2)
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else np.inf)
    return {
        "lhs": lhs,
        "rhs": rhs,
        "ratio": ratio,
        "bound": bound,
        "within_bound": bool(ratio <= bound * (1 + 1e-9)),
    }

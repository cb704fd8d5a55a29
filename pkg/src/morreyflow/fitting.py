"""Power-law rate fits in log-log coordinates."""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFit

__all__ = ["RateFit", "fit_power_law"]

# Values at or below this are treated as underflowed, not data.
NORM_FLOOR = 1e-280


@dataclass(frozen=True)
class RateFit:
    """A fitted power-law exponent against its theoretical target.

    fitted_exponent is the least-squares slope of log(value) vs log(t) over
    the window; residual is the RMS misfit of that line; constant_hat is the
    empirical prefactor max_t t^(-target) * value(t) / scale.
    """

    target_exponent: float
    fitted_exponent: float
    residual: float
    window: tuple
    constant_hat: float

    def to_dict(self) -> dict:
        return {
            "target_exponent": self.target_exponent,
            "fitted_exponent": self.fitted_exponent,
            "residual": self.residual,
            "t_window": list(self.window),
            "constant_hat": self.constant_hat,
        }


def fit_power_law(times, values, target_exponent, scale=1.0) -> RateFit:
    """Least-squares slope of log(values) vs log(times).

    scale normalizes constant_hat (typically a norm of the initial data).
    Raises DegenerateFit when values underflow or fewer than 3 points remain.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if len(t) < 3:
        raise DegenerateFit(f"need >= 3 samples, got {len(t)}")
    if np.any(v <= NORM_FLOOR) or np.any(t <= 0):
        raise DegenerateFit("values underflow or non-positive times")
    logt, logv = np.log(t), np.log(v)
    slope, intercept = np.polyfit(logt, logv, 1)
    resid = logv - (slope * logt + intercept)
    rms = float(np.sqrt(np.mean(resid**2)))
    if scale <= 0:
        constant = np.inf
    else:
        constant = float(np.max(t ** (-target_exponent) * v) / scale)
    return RateFit(
        target_exponent=float(target_exponent),
        fitted_exponent=float(slope),
        residual=rms,
        window=(float(t[0]), float(t[-1])),
        constant_hat=constant,
    )

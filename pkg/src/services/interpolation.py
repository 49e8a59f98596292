"""Monotone piecewise-cubic interpolation with a constant fill outside the samples"""

import numpy as np
from scipy.interpolate import PchipInterpolator


def monotone_cubic(x_samples: np.ndarray, values: np.ndarray, x, fill: float = 0.0) -> np.ndarray:
    """
    Interpolate (x_samples, values) at x with a PCHIP interpolant.

    Points outside [x_samples[0], x_samples[-1]] get ``fill``. Two samples
    fall back to linear interpolation; a single sample is constant on
    itself only.
    """
    xs = np.asarray(x_samples, dtype=float)
    ys = np.asarray(values, dtype=float)
    xq = np.asarray(x, dtype=float)
    inside = (xq >= xs[0]) & (xq <= xs[-1])
    if len(xs) >= 3:
        out = PchipInterpolator(xs, ys, extrapolate=False)(xq)
    elif len(xs) == 2:
        out = np.interp(xq, xs, ys)
    else:
        out = np.full(xq.shape, ys[0] if len(ys) else fill)
    return np.where(inside, out, fill)

"""Pure-numpy implementations of the hot stencil kernels.

These are the fallback twins of the compiled extension ``stringlab._kernels``;
both expose the same functions and must agree to machine precision.  The
fourth-order finite-difference stencil along axis 0 is the single most-called
dense kernel in the package (every geometry rebuild differentiates every
tensor component along tau), which is why it gets a compiled variant.
"""

import numpy as np

# 6-point one-sided stencils (5th order, exact through degree 5) for the two
# rows at each tau boundary; the smaller error constant keeps boundary rows
# from dominating curvature errors where the metric steepens.
_EDGE0 = np.array([-137.0, 300.0, -300.0, 200.0, -75.0, 12.0]) / 60.0
_EDGE1 = np.array([-12.0, -65.0, 120.0, -60.0, 20.0, -3.0]) / 60.0


def fd4_axis0(values: np.ndarray, h: float) -> np.ndarray:
    """Fourth-order first derivative along axis 0 of a (n, m) float64 array.

    Central 5-point stencil in the interior, one-sided 6-point stencils on
    the first and last two rows.  Requires n >= 9 so the one-sided rows do
    not overlap.
    """
    v = values
    n = v.shape[0]
    if n < 9:
        raise ValueError(f"fd4_axis0 needs at least 9 rows, got {n}")
    out = np.empty_like(v)
    inv12h = 1.0 / (12.0 * h)
    out[2:-2] = (v[:-4] - 8.0 * v[1:-3] + 8.0 * v[3:-1] - v[4:]) * inv12h
    for row, coeff in ((0, _EDGE0), (1, _EDGE1)):
        c = coeff / h
        out[row] = sum(c[m] * v[m] for m in range(6))
        out[-1 - row] = -sum(c[m] * v[-1 - m] for m in range(6))
    return out

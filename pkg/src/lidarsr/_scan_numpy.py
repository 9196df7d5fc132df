"""Pure-numpy scan kernels.

Fallback for lidarsr._scan_core (the compiled extension).  Timestep-
independent quantities are precomputed with vectorized numpy; only the
recurrence itself runs as a Python loop over the sequence axis.  Both
backends implement the same contracts and agree to float rounding.
"""

import numpy as np

BACKEND_NAME = "numpy"


def lti_scan(a_bar, b_bar, c, d, x):
    """Linear time-invariant scan.

    h_t = a_bar * h_{t-1} + b_bar * x_t        (per channel, state dim N)
    y_t = <c, h_t> + d * x_t

    a_bar, b_bar, c: (D, N); d: (D,); x: (D, L).  Returns y: (D, L).
    """
    D, L = x.shape
    bu = b_bar[:, :, None] * x[:, None, :]  # (D, N, L)
    h = np.zeros_like(a_bar)
    y = np.empty((D, L))
    for t in range(L):
        h = a_bar * h + bu[:, :, t]
        y[:, t] = np.einsum("dn,dn->d", c, h)
    y += d[:, None] * x
    return y


def selective_scan(a, d, delta, b, c, x):
    """Input-dependent scan with per-timestep discretization.

    a_bar_t = exp(delta_t * a)   (D, N)
    h_t     = a_bar_t * h_{t-1} + (delta_t * b_t) * x_t
    y_t     = <c_t, h_t> + d * x_t

    a: (D, N); d: (D,); delta: (D, L); b, c: (N, L); x: (D, L).
    Returns y: (D, L).
    """
    D, L = x.shape
    a_bar = np.exp(delta[:, None, :] * a[:, :, None])  # (D, N, L)
    bu = delta[:, None, :] * b[None, :, :] * x[:, None, :]  # (D, N, L)
    h = np.zeros_like(a)
    y = np.empty((D, L))
    for t in range(L):
        h = a_bar[:, :, t] * h + bu[:, :, t]
        y[:, t] = h @ c[:, t]
    y += d[:, None] * x
    return y

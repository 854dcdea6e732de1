"""Pure-numpy fallback for the compiled scan kernel (bit-identical results)."""

from __future__ import annotations

import numpy as np


def ou_scan(decay, gain, increments, out):
    """out[m+1] = decay * out[m] + gain * increments[m], in place.

    Two rounded products and one rounded add per element, exactly as the
    compiled version performs them.
    """
    steps, nmodes = increments.shape
    if out.shape != (steps + 1, nmodes):
        raise ValueError("out must have shape (steps+1, nmodes)")
    if decay.shape != (nmodes,) or gain.shape != (nmodes,):
        raise ValueError("decay/gain must have length nmodes")
    forced = gain * increments
    for m in range(steps):
        np.multiply(decay, out[m], out=out[m + 1])
        out[m + 1] += forced[m]

# cython: boundscheck=False, wraparound=False
"""Sequential mode recurrences over time.

This is the one inner loop numpy cannot vectorize (each step feeds the next);
everything else in the package is FFT- or BLAS-bound already. Results must be
bit-identical to shelab._scan_py (same operation order, no FMA contraction:
see setup.py flags).
"""

import numpy as np

cimport numpy as cnp

ctypedef fused modeval:
    double
    double complex


def ou_scan(const double[::1] decay, const double[::1] gain,
            modeval[:, ::1] increments, modeval[:, ::1] out):
    """out[m+1] = decay * out[m] + gain * increments[m], in place.

    out has shape (steps+1, nmodes); row 0 is the initial state.
    """
    cdef Py_ssize_t steps = increments.shape[0]
    cdef Py_ssize_t nmodes = increments.shape[1]
    cdef Py_ssize_t m, k
    if out.shape[0] != steps + 1 or out.shape[1] != nmodes:
        raise ValueError("out must have shape (steps+1, nmodes)")
    if decay.shape[0] != nmodes or gain.shape[0] != nmodes:
        raise ValueError("decay/gain must have length nmodes")
    for m in range(steps):
        for k in range(nmodes):
            out[m + 1, k] = decay[k] * out[m, k] + gain[k] * increments[m, k]

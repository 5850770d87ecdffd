# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled spectral kernels: per-frame radix-2 power spectra with a direct
O(L^2) transform for non-power-of-two frame lengths.

Mirrors melflow._spectral_np; the pure version is the fallback when this
extension is not built.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "cython"


def _bit_reverse_indices(Py_ssize_t n):
    bits = int(n).bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


cdef void _power_pow2(double[:, ::1] frames, double[:, ::1] out,
                      Py_ssize_t[::1] rev, double[::1] twr, double[::1] twi,
                      double[::1] re, double[::1] im) noexcept:
    cdef Py_ssize_t n_frames = frames.shape[0]
    cdef Py_ssize_t length = frames.shape[1]
    cdef Py_ssize_t n_bins = length // 2 + 1
    cdef Py_ssize_t f, i, j, k, blk, size, half, base, lo, hi
    cdef double er, ei, otr, oti, wr, wi
    for f in range(n_frames):
        for i in range(length):
            re[i] = frames[f, rev[i]]
            im[i] = 0.0
        size = 2
        base = 0
        while size <= length:
            half = size >> 1
            for blk in range(0, length, size):
                for j in range(half):
                    wr = twr[base + j]
                    wi = twi[base + j]
                    lo = blk + j
                    hi = blk + half + j
                    otr = re[hi] * wr - im[hi] * wi
                    oti = re[hi] * wi + im[hi] * wr
                    er = re[lo]
                    ei = im[lo]
                    re[lo] = er + otr
                    im[lo] = ei + oti
                    re[hi] = er - otr
                    im[hi] = ei - oti
            base += half
            size <<= 1
        for k in range(n_bins):
            out[f, k] = re[k] * re[k] + im[k] * im[k]


cdef void _power_direct(double[:, ::1] frames, double[:, ::1] out,
                        double[:, ::1] ct, double[:, ::1] st) noexcept:
    cdef Py_ssize_t n_frames = frames.shape[0]
    cdef Py_ssize_t length = frames.shape[1]
    cdef Py_ssize_t n_bins = length // 2 + 1
    cdef Py_ssize_t f, k, t
    cdef double sr, si
    for f in range(n_frames):
        for k in range(n_bins):
            sr = 0.0
            si = 0.0
            for t in range(length):
                sr += frames[f, t] * ct[k, t]
                si += frames[f, t] * st[k, t]
            out[f, k] = sr * sr + si * si


def power_spectra(frames):
    """Unilateral power spectra |X(k)|^2, k = 0..L//2, for a (n_frames, L) batch."""
    frames = np.ascontiguousarray(frames, dtype=np.float64)
    if frames.ndim != 2:
        raise ValueError("frames must be a 2-D array")
    cdef Py_ssize_t length = frames.shape[1]
    if length < 1:
        raise ValueError("frame length must be at least 1")
    cdef Py_ssize_t n_bins = length // 2 + 1
    out = np.empty((frames.shape[0], n_bins), dtype=np.float64)
    if frames.shape[0] == 0:
        return out
    if length == 1:
        out[:, 0] = frames[:, 0] ** 2
        return out
    if length & (length - 1) == 0:
        # Per-stage twiddles laid out back to back: size = 2, 4, ..., L.
        angles = []
        size = 2
        while size <= length:
            angles.append(-2.0 * np.pi * np.arange(size // 2) / size)
            size *= 2
        ang = np.concatenate(angles)
        _power_pow2(frames, out, _bit_reverse_indices(length),
                    np.cos(ang), np.sin(ang),
                    np.empty(length), np.empty(length))
    else:
        ang = -2.0 * np.pi * np.outer(np.arange(n_bins), np.arange(length)) / length
        _power_direct(frames, out, np.cos(ang), np.sin(ang))
    return out
